import os

import numpy as np
from setuptools import Extension, setup

# PMSDR_NO_EXT=1 skips the compiled core; the package then runs on its
# pure-Python kernels.
if os.environ.get("PMSDR_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pmsdr._cd_kernel",
                ["src/pmsdr/_cd_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
