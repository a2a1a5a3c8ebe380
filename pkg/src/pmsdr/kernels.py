"""Backend selection for the hot kernels.

The compiled core (``pmsdr._cd_kernel``) is used when it imports; otherwise,
or when ``PMSDR_PURE_PYTHON=1`` is set, the pure-Python implementation runs.
"""
import os

from . import _cd_fallback

BACKEND = "python"
enet_cd = _cd_fallback.enet_cd

if not os.environ.get("PMSDR_PURE_PYTHON"):
    try:
        from ._cd_kernel import enet_cd  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def get_enet_cd(backend: str | None = None):
    """Return the solver for ``backend`` ("cython", "python" or None for the default)."""
    if backend is None:
        return enet_cd
    if backend == "python":
        return _cd_fallback.enet_cd
    if backend == "cython":
        from ._cd_kernel import enet_cd as compiled
        return compiled
    raise ValueError(f"unknown backend {backend!r}")
