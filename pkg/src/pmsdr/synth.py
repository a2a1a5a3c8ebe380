"""Ground-truth union-of-subspaces datasets with partially permuted columns.

Seeding
-------
Every generator takes an integer seed. ``build_dataset`` derives all
sub-streams from ``numpy.random.SeedSequence(seed)`` by spawning, in this
fixed order: one child per group basis, one per group's samples, one per
group's outlier selection, one per column's permutation, and one for the
noise. Changing the order would change every dataset, so it is frozen.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ConstraintError, InvalidInput, RankError
from .numerics import as_data_matrix


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class PartialPermutation:
    """A permutation of ``range(length)`` that moves only ``indices``.

    ``phi[i]`` is the source coordinate of entry ``i``: permuting a vector
    ``y`` gives ``y_tilde[i] = y[phi[i]]``.
    """

    length: int
    indices: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.int64)
        idx = np.asarray(self.indices, dtype=np.int64)
        if phi.shape != (self.length,) or not np.array_equal(np.sort(phi), np.arange(self.length)):
            raise InvalidInput("phi must be a permutation of range(length)")
        moved = np.flatnonzero(phi != np.arange(self.length))
        if not np.array_equal(np.sort(idx), moved):
            raise InvalidInput("indices must be exactly the moved coordinates")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "indices", np.sort(idx))

    @classmethod
    def identity(cls, length: int) -> "PartialPermutation":
        return cls(length, np.empty(0, dtype=np.int64), np.arange(length))

    @classmethod
    def from_phi(cls, phi) -> "PartialPermutation":
        phi = np.asarray(phi, dtype=np.int64)
        return cls(len(phi), np.flatnonzero(phi != np.arange(len(phi))), phi)

    @property
    def inverse_phi(self) -> np.ndarray:
        inv = np.empty_like(self.phi)
        inv[self.phi] = np.arange(self.length)
        return inv

    def apply(self, v):
        return np.asarray(v)[self.phi]

    def invert(self, v):
        return np.asarray(v)[self.inverse_phi]

    def matrix(self) -> np.ndarray:
        """Permutation matrix ``P`` with ``P @ y == apply(y)``."""
        P = np.zeros((self.length, self.length))
        P[np.arange(self.length), self.phi] = 1.0
        return P

    def is_strict(self) -> bool:
        """True when no moved index is a fixed point or lies on a 2-cycle."""
        idx = self.indices
        return bool(np.all(self.phi[idx] != idx) and np.all(self.phi[self.phi[idx]] != idx))


def generate_basis(M: int, r: int, rng_seed=None) -> np.ndarray:
    """Random orthonormal ``(M, r)`` basis ``U = X (X^T X)^{-1/2}``, ``X ~ N(0, 1/M)``."""
    M, r = int(M), int(r)
    if r < 1 or r > M:
        raise RankError(f"need 1 <= r <= M, got r={r}, M={M}")
    X = _rng(rng_seed).normal(0.0, 1.0 / math.sqrt(M), size=(M, r))
    w, V = np.linalg.eigh(X.T @ X)
    return X @ ((V / np.sqrt(w)) @ V.T)


def sample_points(basis, n: int, rng_seed=None) -> np.ndarray:
    """``n`` columns ``basis @ beta`` with ``beta ~ N(0, I_r / r)``."""
    if n < 1:
        raise InvalidInput(f"need at least one sample, got n={n}")
    B = np.asarray(basis, dtype=np.float64)
    r = B.shape[1]
    beta = _rng(rng_seed).normal(0.0, 1.0 / math.sqrt(r), size=(r, n))
    return B @ beta


def _derangement(k: int, strict: bool, rng: np.random.Generator) -> np.ndarray:
    ar = np.arange(k)
    while True:
        p = rng.permutation(k)
        if np.any(p == ar):
            continue
        if strict and np.any(p[p] == ar):
            continue
        return p


def make_partial_permutation(M: int, shuffle_ratio: float, strict: bool = False,
                             rng_seed=None) -> PartialPermutation:
    """Shuffle ``floor(shuffle_ratio * M)`` uniformly chosen coordinates.

    The moved coordinates receive a uniformly drawn fixed-point-free
    permutation (rejection sampled); ``strict`` also rejects 2-cycles.
    """
    if not 0.0 <= shuffle_ratio <= 1.0:
        raise ConstraintError(f"shuffle_ratio must lie in [0, 1], got {shuffle_ratio}")
    k = int(math.floor(shuffle_ratio * M + 1e-9))
    return permutation_with_count(M, k, strict, rng_seed)


def permutation_with_count(M: int, k: int, strict: bool = False, rng_seed=None) -> PartialPermutation:
    """Like :func:`make_partial_permutation` with an explicit moved count ``k``."""
    if k == 1:
        raise ConstraintError("a single shuffled index cannot move")
    if strict and 0 < k <= 2:
        raise ConstraintError(f"strict mode needs at least 3 shuffled indices, got {k}")
    if not 0 <= k <= M:
        raise ConstraintError(f"shuffled count {k} outside [0, {M}]")
    if k == 0:
        return PartialPermutation.identity(M)
    rng = _rng(rng_seed)
    O = np.sort(rng.choice(M, size=k, replace=False))
    phi = np.arange(M)
    phi[O] = O[_derangement(k, strict, rng)]
    return PartialPermutation(M, O, phi)


def add_noise(A, snr_db: float, rng_seed=None) -> np.ndarray:
    """Add i.i.d. Gaussian noise at ``snr_db`` (expected Frobenius-energy ratio)."""
    A = as_data_matrix(A)
    if snr_db is None or math.isinf(snr_db):
        return A.copy()
    if snr_db <= 0:
        raise InvalidInput(f"snr_db must be positive, got {snr_db}")
    sigma2 = np.sum(A * A) / (A.size * 10.0 ** (snr_db / 10.0))
    return A + _rng(rng_seed).normal(0.0, math.sqrt(sigma2), size=A.shape)


@dataclass
class SynthConfig:
    M: int = 50
    r: int = 5
    L: int = 3
    samples_per_group: int = 120
    outlier_ratio: float = 0.6
    shuffle_ratio: float = 0.2
    snr_db: float | None = 40.0
    strict: bool = False

    def validate(self) -> None:
        if self.M < 2 or self.L < 1:
            raise ConfigError(f"need M >= 2 and L >= 1, got M={self.M}, L={self.L}")
        if not 1 <= self.r < self.M:
            raise ConfigError(f"need 1 <= r < M, got r={self.r}, M={self.M}")
        if self.samples_per_group < 1:
            raise ConfigError("samples_per_group must be positive")
        if not 0.0 <= self.outlier_ratio < 1.0:
            raise ConfigError(f"outlier_ratio must lie in [0, 1), got {self.outlier_ratio}")
        if not 0.0 <= self.shuffle_ratio <= 1.0:
            raise ConfigError(f"shuffle_ratio must lie in [0, 1], got {self.shuffle_ratio}")
        k = self.shuffled_count
        if k == 1 or (self.strict and 0 < k <= 2):
            raise ConfigError(f"shuffle_ratio {self.shuffle_ratio} gives an infeasible count {k}")
        if self.outlier_ratio > 0 and k == 0:
            raise ConfigError("outliers need at least two shuffled entries")
        if self.snr_db is not None and not math.isinf(self.snr_db) and self.snr_db <= 0:
            raise ConfigError("snr_db must be positive")

    @property
    def shuffled_count(self) -> int:
        return int(math.floor(self.shuffle_ratio * self.M + 1e-9))

    @property
    def outliers_per_group(self) -> int:
        return int(round(self.outlier_ratio * self.samples_per_group))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg


@dataclass
class DatasetBundle:
    """Corrupted matrix plus the full ground truth that produced it.

    ``clean`` is the noiseless matrix ``G``; ``corrupted`` is ``G`` with
    outlier columns permuted and noise added last. ``permutations`` maps an
    outlier column index to its :class:`PartialPermutation`.
    """

    corrupted: np.ndarray
    clean: np.ndarray
    bases: list
    labels: np.ndarray
    outlier_mask: np.ndarray
    permutations: dict = field(default_factory=dict)
    config: SynthConfig | None = None
    seed: int | None = None

    @property
    def shape(self):
        return self.corrupted.shape

    def permuted_clean(self) -> np.ndarray:
        """Corrupted matrix before noise."""
        out = self.clean.copy()
        for j, perm in self.permutations.items():
            out[:, j] = perm.apply(self.clean[:, j])
        return out


def build_dataset(cfg: SynthConfig, rng_seed: int = 0) -> DatasetBundle:
    """Generate a dataset following the synthetic protocol in ``cfg``."""
    cfg.validate()
    root = np.random.SeedSequence(rng_seed)
    L, n = cfg.L, cfg.samples_per_group
    N = L * n
    children = root.spawn(3 * L + N + 1)
    basis_ss = children[:L]
    sample_ss = children[L:2 * L]
    outlier_ss = children[2 * L:3 * L]
    perm_ss = children[3 * L:3 * L + N]
    noise_ss = children[-1]

    bases = [generate_basis(cfg.M, cfg.r, np.random.default_rng(s)) for s in basis_ss]
    clean = np.hstack([sample_points(B, n, np.random.default_rng(s))
                       for B, s in zip(bases, sample_ss)])
    labels = np.repeat(np.arange(L), n)
    outlier_mask = np.zeros(N, dtype=bool)
    n_out = cfg.outliers_per_group
    for k in range(L):
        chosen = np.random.default_rng(outlier_ss[k]).choice(n, size=n_out, replace=False)
        outlier_mask[k * n + chosen] = True

    corrupted = clean.copy()
    permutations = {}
    for j in np.flatnonzero(outlier_mask):
        perm = permutation_with_count(cfg.M, cfg.shuffled_count, cfg.strict,
                                      np.random.default_rng(perm_ss[j]))
        permutations[int(j)] = perm
        corrupted[:, j] = perm.apply(clean[:, j])

    snr = math.inf if cfg.snr_db is None else cfg.snr_db
    corrupted = add_noise(corrupted, snr, np.random.default_rng(noise_ss))
    return DatasetBundle(corrupted, clean, bases, labels, outlier_mask, permutations,
                         config=cfg, seed=rng_seed)
