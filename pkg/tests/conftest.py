import numpy as np
import pytest

from pmsdr.synth import SynthConfig, build_dataset, generate_basis


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_bundle():
    cfg = SynthConfig(M=30, r=3, L=2, samples_per_group=40, outlier_ratio=0.3,
                      shuffle_ratio=0.2, snr_db=None)
    return build_dataset(cfg, 7)


def orthogonal_blocks(M=20, r=3, n=15, seed=0):
    """Two noiseless groups spanning orthogonal subspaces, unit-norm columns."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((M, 2 * r)))
    X = np.hstack([Q[:, :r] @ rng.standard_normal((r, n)), Q[:, r:] @ rng.standard_normal((r, n))])
    return X / np.linalg.norm(X, axis=0), np.repeat([0, 1], n)


@pytest.fixture
def basis_3():
    return generate_basis(50, 3, 1)
