"""Closed-form residual statistics for shuffled projections and Monte Carlo checks.

Setting: ``U`` is a random orthonormal ``(M, r)`` basis, ``y = U beta`` with
``beta ~ N(0, I/r)``, and ``M2`` of the ``M`` coordinates of ``y`` are
shuffled. The least-squares residual ``y_tilde - U U^T y_tilde`` tends to be
larger on the shuffled coordinates; the functions here predict by how much
and how often its largest entry lands there.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import multigammaln, ndtr, ndtri

from .errors import DomainError
from .synth import generate_basis, permutation_with_count, sample_points

DELTA = 0.0054


def _check_m(m) -> int:
    if m < 2 or int(m) != m:
        raise DomainError(f"need an integer m >= 2, got {m}")
    return int(m)


def rho(m: int) -> float:
    """``Phi^{-1}(1 - 1/m)``, the typical size of the largest of ``m`` standard normals."""
    m = _check_m(m)
    # -Phi^{-1}(1/m) avoids the cancellation in 1 - 1/m for large m
    return float(-ndtri(1.0 / m)) + 0.0


def psi(m: int) -> float:
    """``1 / (m * phi(rho(m)))`` with ``phi`` the standard normal density."""
    x = rho(m)
    return float(1.0 / (m * math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)))


@dataclass
class ResidualModel:
    M: int
    M1: int
    M2: int
    r: int
    sigma_xi_sq: float
    sigma_eta_sq: float

    def __post_init__(self):
        if self.M1 + self.M2 != self.M:
            raise DomainError(f"M1 + M2 = {self.M1 + self.M2} != M = {self.M}")
        if self.M1 < 2 or self.M2 < 2:
            raise DomainError(f"need M1 >= 2 and M2 >= 2, got {self.M1}, {self.M2}")
        if not (self.sigma_xi_sq > 0 and self.sigma_eta_sq > 0):
            raise DomainError("variances must be positive")

    @classmethod
    def from_counts(cls, M, M2, r, sigma_xi_sq, sigma_eta_sq):
        return cls(M, M - M2, M2, r, sigma_xi_sq, sigma_eta_sq)


def success_probability(model: ResidualModel) -> float:
    """Approximate probability that the largest residual entry is a shuffled one.

    Returns the raw value of ``2 Phi(z) - 1``, which is negative when the
    unshuffled group is expected to win; clamp it for reporting.
    """
    sx, se = math.sqrt(model.sigma_xi_sq), math.sqrt(model.sigma_eta_sq)
    num = se * rho(model.M2) - sx * rho(model.M1)
    den = math.sqrt(model.sigma_eta_sq * psi(model.M2) ** 2 + model.sigma_xi_sq * psi(model.M1) ** 2)
    return float(2.0 * ndtr(num / den) - 1.0)


def _check_dims(M, M2, r):
    if not (1 <= r < M) or not (1 <= M2 <= M):
        raise DomainError(f"need 1 <= r < M and 1 <= M2 <= M, got M={M}, M2={M2}, r={r}")


def sigma_xi_sq_bound(M: int, M2: int, r: int):
    """High-probability bound on the unshuffled residual variance.

    Returns ``(bound, C, delta)`` with ``C`` at its largest admissible value.
    """
    _check_dims(M, M2, r)
    C = 2.0 + 6.0 * (1.0 + math.sqrt(2.0)) * math.sqrt((M - r) / (r * M2 * M))
    bound = C * r * (M - r) * M2 / (M ** 2 * (M - 1) * (M + 2))
    return bound, C, DELTA


def expected_sigma_xi_upper(M: int, M2: int, r: int) -> float:
    _check_dims(M, M2, r)
    d = M ** 2 * (M - 1)
    return (M2 * r * (M - r) / (d * (M + 2))
            + math.sqrt(6.0) * M2 * math.sqrt(r) * (M - r) ** 1.5 / (d * (M + 2) ** 1.5)
            + M2 ** 2 / M ** 3)


def log_multigamma(x: float, p: int) -> float:
    """``log Gamma_p(x)``; needs ``x > (p - 1) / 2``."""
    if p < 1 or not x > (p - 1) / 2.0:
        raise DomainError(f"multivariate gamma needs x > (p-1)/2, got x={x}, p={p}")
    return float(multigammaln(x, p))


def expected_sigma_eta_lower(M: int, M2: int, r: int) -> float:
    """Lower bound on the mean shuffled residual variance (gamma ratio in log space)."""
    _check_dims(M, M2, r)
    log_ratio = (log_multigamma(r / 2.0 + 3.0 / r, r) + log_multigamma(M / 2.0, r)
                 - log_multigamma(M / 2.0 + 3.0 / r, r) - log_multigamma(r / 2.0, r))
    return (2.0 / M - 2.0 * (M2 * M + M - 4) * (M - r) / (M ** 2 * (M - 1) * (M + 2))
            + math.exp(log_ratio) / M2)


def _eta_bracket(M, M2, r):
    return ((r / M - 1.0) ** 2 + 2.0 * r * (M - r) / (M ** 2 * (M + 2))
            + (M2 - 1) * r * (M - r) / (M * (M - 1) * (M + 2)))


def expected_sigma_eta_approx(M: int, M2: int, r: int, variant: str = "main") -> float:
    """Approximate mean shuffled residual variance.

    Two prefactors are in circulation for the same bracket: ``(2M - M2)/M^2``
    (``variant="main"``) and ``(M - M2)/M^2`` (``variant="appendix"``).
    """
    _check_dims(M, M2, r)
    if variant == "main":
        pre = (2 * M - M2) / M ** 2
    elif variant == "appendix":
        pre = (M - M2) / M ** 2
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return pre * _eta_bracket(M, M2, r)


def projection_moment_predictions(M: int, r: int, M2: int | None = None) -> dict:
    """Moments of the entries of a random rank-``r`` projector ``H = U U^T``.

    ``trace_*`` refer to the sum of ``M2`` diagonal entries (``M2`` defaults
    to ``M``).
    """
    if not 1 <= r <= M or M < 2:
        raise DomainError(f"need 1 <= r <= M and M >= 2, got M={M}, r={r}")
    M2 = M if M2 is None else M2
    g = r * (M - r)
    return {
        "mean_Hii": r / M,
        "var_Hii": 2.0 * g / (M ** 2 * (M + 2)),
        "var_Hij": g / (M * (M - 1) * (M + 2)),
        "cov_Hii_Hkk": -2.0 * g / (M ** 2 * (M - 1) * (M + 2)),
        "cov_Hij_Hji": g / (M * (M - 1) * (M + 2)),
        "trace_mean": r * M2 / M,
        "trace_var": 2.0 * M2 * (M - M2) * g / (M ** 2 * (M + 2) * (M - 1)),
    }


def projection_moment_monte_carlo(M: int, r: int, M2: int | None = None, draws: int = 10000,
                                  rng_seed=0) -> dict:
    """Empirical counterparts of :func:`projection_moment_predictions`.

    Diagonal and off-diagonal entries are pooled over positions (they are
    exchangeable). Off-diagonal variances use the known zero mean.
    """
    M2 = M if M2 is None else M2
    rng = np.random.default_rng(rng_seed)
    iu = np.triu_indices(M, 1)
    diag_sum = diag_sq = off_sq = cov_acc = 0.0
    traces = np.empty(draws)
    for t in range(draws):
        U = generate_basis(M, r, rng)
        H = U @ U.T
        d = np.diag(H)
        diag_sum += d.sum()
        diag_sq += d @ d
        off_sq += np.sum(H[iu] ** 2)
        cov_acc += (d[0] - r / M) * (d[1] - r / M)
        traces[t] = d[:M2].sum()
    n_diag = draws * M
    mean_d = diag_sum / n_diag
    return {
        "mean_Hii": mean_d,
        "var_Hii": diag_sq / n_diag - mean_d ** 2,
        "var_Hij": off_sq / (draws * iu[0].size),
        "cov_Hii_Hkk": cov_acc / draws,
        "trace_mean": float(traces.mean()),
        "trace_mean_se": float(traces.std(ddof=1) / math.sqrt(draws)),
        "trace_var": float(traces.var(ddof=1)),
    }


def _residual_parts(U, phi, beta):
    """Residual ``y_tilde - U U^T y_tilde`` computed directly."""
    y_t = (U @ beta)[phi]
    return y_t - U @ (U.T @ y_t)


def target_expression_sides(M: int, M2: int, r: int, rng_seed=0, strict: bool = True,
                            beta_scale: float = 1.0):
    """Residual ``y_tilde - U U^T y_tilde`` computed directly and as ``kappa(j)^T tau beta``.

    ``tau = (I - Pi) U`` with ``Pi`` the row-selection matrix of the
    permutation and ``kappa(j) = U u_j - e_j`` where ``u_j`` is row ``j`` of ``U``.
    """
    rng = np.random.default_rng(rng_seed)
    U = generate_basis(M, r, rng)
    perm = permutation_with_count(M, M2, strict, rng)
    beta = beta_scale * rng.normal(0.0, 1.0 / math.sqrt(r), size=r)
    direct = _residual_parts(U, perm.phi, beta)
    tau = (np.eye(M) - perm.matrix()) @ U
    kappa = U @ U.T - np.eye(M)  # column j is kappa(j)
    via_kappa = np.array([kappa[:, j] @ (tau @ beta) for j in range(M)])
    return direct, via_kappa


def target_expression_check(M: int, M2: int, r: int, rng_seed=0, strict: bool = True,
                            beta_scale: float = 1.0) -> float:
    """Max deviation between the two residual computations of :func:`target_expression_sides`."""
    direct, via_kappa = target_expression_sides(M, M2, r, rng_seed, strict, beta_scale)
    return float(np.max(np.abs(direct - via_kappa)))


@dataclass
class MonteCarloEstimate:
    """Pooled residual statistics over ``trials`` random instances.

    ``var_*`` are mean squared residual entries in each group (the residual
    has zero mean). ``std_err`` holds standard errors computed from the
    per-trial group means. ``batch_var_unshuffled`` holds one pooled
    unshuffled-variance estimate per batch.
    """

    M: int
    M2: int
    r: int
    var_unshuffled: float
    var_shuffled: float
    p_max_in_shuffled: float
    trials: int
    std_err: dict = field(default_factory=dict)
    batch_var_unshuffled: np.ndarray = field(default_factory=lambda: np.empty(0))

    def residual_model(self) -> ResidualModel:
        return ResidualModel.from_counts(self.M, self.M2, self.r, self.var_unshuffled,
                                         self.var_shuffled)


def _mc_batch(M, M2, r, n, seed, strict):
    rng = np.random.default_rng(seed)
    xi = np.empty(n)
    eta = np.full(n, np.nan)
    hit = np.zeros(n, dtype=bool)
    for t in range(n):
        U = generate_basis(M, r, rng)
        perm = permutation_with_count(M, M2, strict, rng)
        beta = sample_points(U, 1, rng)  # U beta with beta ~ N(0, I/r)
        y_t = beta[perm.phi, 0]
        res = y_t - U @ (U.T @ y_t)
        shuffled = np.zeros(M, dtype=bool)
        shuffled[perm.indices] = True
        sq = res * res
        xi[t] = sq[~shuffled].mean()
        if M2:
            eta[t] = sq[shuffled].mean()
        hit[t] = shuffled[int(np.argmax(np.abs(res)))]
    return xi, eta, hit


def monte_carlo_residuals(M: int, M2: int, r: int, trials: int = 10000, rng_seed=0,
                          batch_size: int = 10, strict: bool = True,
                          threads: int = 1) -> MonteCarloEstimate:
    """Simulate residual statistics for shuffled projections.

    Trials are split into batches of ``batch_size``, each with its own seed
    spawned from ``rng_seed``; results are reduced in batch order so the
    estimate does not depend on ``threads``.
    """
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials}")
    if not 1 <= r < M or not 0 <= M2 < M:
        raise DomainError(f"invalid dimensions M={M}, M2={M2}, r={r}")
    sizes = [batch_size] * (trials // batch_size)
    if trials % batch_size:
        sizes.append(trials % batch_size)
    seeds = np.random.SeedSequence(rng_seed).spawn(len(sizes))
    jobs = [(M, M2, r, n, s, strict) for n, s in zip(sizes, seeds)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _mc_batch(*a), jobs))
    else:
        parts = [_mc_batch(*a) for a in jobs]
    xi = np.concatenate([p[0] for p in parts])
    eta = np.concatenate([p[1] for p in parts])
    hit = np.concatenate([p[2] for p in parts])
    batch_xi = np.array([p[0].mean() for p in parts])
    p = float(hit.mean())
    se = {
        "var_unshuffled": float(xi.std(ddof=1) / math.sqrt(trials)),
        "p_max_in_shuffled": math.sqrt(p * (1.0 - p) / trials),
    }
    if M2:
        var_eta = float(eta.mean())
        se["var_shuffled"] = float(eta.std(ddof=1) / math.sqrt(trials))
    else:
        var_eta = float("nan")
        se["var_shuffled"] = float("nan")
    return MonteCarloEstimate(M, M2, r, float(xi.mean()), var_eta, p, trials, se, batch_xi)


THEORY_COLUMNS = ("M", "M2", "r", "quantity", "predicted", "empirical", "std_err")


def theory_rows(M: int, M2: int, r: int, trials: int = 10000, rng_seed=0, threads: int = 1) -> list:
    """Closed-form predictions next to their Monte Carlo counterparts for one grid point."""
    mc = monte_carlo_residuals(M, M2, r, trials, rng_seed, threads=threads)
    se = mc.std_err
    rows = []

    def add(q, pred, emp, err):
        rows.append({"M": M, "M2": M2, "r": r, "quantity": q, "predicted": float(pred),
                     "empirical": float(emp), "std_err": float(err)})

    if M - M2 >= 2 and M2 >= 2:
        add("success_probability", success_probability(mc.residual_model()),
            mc.p_max_in_shuffled, se["p_max_in_shuffled"])
    add("sigma_xi_sq_bound", sigma_xi_sq_bound(M, M2, r)[0], mc.var_unshuffled, se["var_unshuffled"])
    add("expected_sigma_xi_upper", expected_sigma_xi_upper(M, M2, r), mc.var_unshuffled,
        se["var_unshuffled"])
    try:
        lower = expected_sigma_eta_lower(M, M2, r)
    except DomainError:
        lower = float("nan")
    add("expected_sigma_eta_lower", lower, mc.var_shuffled, se["var_shuffled"])
    for v in ("main", "appendix"):
        add(f"expected_sigma_eta_approx_{v}", expected_sigma_eta_approx(M, M2, r, v),
            mc.var_shuffled, se["var_shuffled"])
    return rows
