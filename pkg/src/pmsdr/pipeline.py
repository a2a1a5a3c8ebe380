"""End-to-end recovery pipeline, evaluation against ground truth and parameter sweeps.

Stages (each a plain function of its declared inputs):

1. ``stage_selfrep`` + ``stage_detect``: self-representation, random-walk
   scores, inlier/outlier split.
2. ``stage_cluster``: spectral clustering of the inliers and one basis per cluster.
3. ``stage_classify``: assign each detected outlier to a cluster.
4. ``stage_recover``: rebuild each detected outlier from its cluster's basis.

Columns are scaled to unit norm once before stage 1; the recovered matrix is
scaled back, so the output is on the input's scale.
"""
from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics
from .classify import classify_outlier
from .cluster import affinity_from_selfrep, estimate_basis, spectral_clustering
from .detect import random_walk_scores, split_by_gap, split_by_known_ratio
from .errors import ConfigError, PMSDRError, StageError
from .metrics import EvaluationReport
from .numerics import as_data_matrix, normalize_columns
from .recover import recover_matrix
from .selfrep import ElasticNetParams, self_representation, transition_matrix
from .synth import SynthConfig, build_dataset

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    """Settings for one pipeline run.

    ``outlier_split`` is ``"known"`` (flag the ``n_out`` lowest scores) or
    ``"gap"`` (split at the widest score gap).
    """

    L: int = 3
    r: int = 5
    lam: float = 0.95
    gamma_en: float | None = None
    alpha_en: float = 50.0
    en_tol: float = 1e-6
    en_max_iter: int = 10000
    walk_T: int = 1000
    outlier_split: str = "known"
    n_out: int | None = None
    gamma_retain: float = 0.5
    max_iter: int = 10
    seed: int = 0
    threads: int = 1

    def validate(self, M: int | None = None, N: int | None = None) -> None:
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        if self.r < 1 or (M is not None and self.r >= M):
            raise ConfigError(f"need 1 <= r < M, got r={self.r}, M={M}")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lam must lie in (0, 1), got {self.lam}")
        if self.gamma_en is not None and self.gamma_en <= 0:
            raise ConfigError("gamma_en must be positive")
        if self.alpha_en <= 0 or self.en_tol <= 0 or self.en_max_iter < 1 or self.walk_T < 1:
            raise ConfigError("solver settings must be positive")
        if not 0.0 < self.gamma_retain <= 1.0:
            raise ConfigError(f"gamma_retain must lie in (0, 1], got {self.gamma_retain}")
        if self.max_iter < 1 or self.threads < 1:
            raise ConfigError("max_iter and threads must be >= 1")
        if self.outlier_split not in ("known", "gap"):
            raise ConfigError(f"outlier_split must be 'known' or 'gap', got {self.outlier_split!r}")
        if self.outlier_split == "known":
            if self.n_out is None:
                raise ConfigError("outlier_split='known' needs n_out")
            if self.n_out < 0 or (N is not None and self.n_out >= N):
                raise ConfigError(f"n_out={self.n_out} invalid for {N} columns")

    def enet_params(self) -> ElasticNetParams:
        return ElasticNetParams(self.lam, self.gamma_en, self.alpha_en, self.en_tol, self.en_max_iter)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown pipeline config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def stage_selfrep(G_norm, cfg: PipelineConfig) -> np.ndarray:
    return self_representation(G_norm, cfg.enet_params(), threads=cfg.threads)


def stage_detect(R, cfg: PipelineConfig):
    """Returns ``(scores, outlier_mask)``."""
    scores = random_walk_scores(transition_matrix(R), cfg.walk_T)
    if cfg.outlier_split == "known":
        _, outliers = split_by_known_ratio(scores, cfg.n_out)
    else:
        _, outliers = split_by_gap(scores)
    return scores.pi, outliers


def stage_cluster(G_norm, R, outlier_mask, cfg: PipelineConfig):
    """Returns ``(inlier_labels, models)``; ``inlier_labels`` is -1 on outlier columns."""
    inliers = ~np.asarray(outlier_mask, dtype=bool)
    W = affinity_from_selfrep(R, inliers, cfg.L)
    X = G_norm[:, inliers]
    assign = spectral_clustering(W, cfg.L, rng_seed=cfg.seed, points=X)
    labels = np.full(G_norm.shape[1], -1, dtype=np.int64)
    labels[inliers] = assign.labels
    models = [estimate_basis(X[:, assign.labels == k], cfg.r, group=k) for k in range(cfg.L)]
    return labels, models


def stage_classify(G_norm, outlier_mask, models, cfg: PipelineConfig):
    """Returns ``(outlier_labels, results)``; labels are -1 on inlier columns."""
    labels = np.full(G_norm.shape[1], -1, dtype=np.int64)
    cols = np.flatnonzero(outlier_mask)

    def one(j):
        return classify_outlier(G_norm[:, j], models, cfg.gamma_retain, cfg.max_iter)

    if cfg.threads > 1 and cols.size:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one, cols))
    else:
        results = [one(j) for j in cols]
    for j, res in zip(cols, results):
        labels[j] = res.label
    return labels, dict(zip(cols.tolist(), results))


def stage_recover(G_norm, outlier_mask, outlier_labels, models, cfg: PipelineConfig) -> np.ndarray:
    return recover_matrix(G_norm, outlier_mask, np.where(outlier_mask, outlier_labels, 0),
                          models, cfg.gamma_retain, cfg.max_iter)


def rescale_output(G, G_hat_norm, norms, outlier_mask) -> np.ndarray:
    """Undo column normalization on recovered columns; inliers are copied from ``G`` untouched."""
    G_hat = np.array(G, dtype=np.float64, copy=True)
    G_hat[:, outlier_mask] = G_hat_norm[:, outlier_mask] * norms[outlier_mask]
    return G_hat


@dataclass
class PipelineRun:
    """Output of :func:`run_pipeline`; unpacks as ``(G_hat, report)``."""

    G_hat: np.ndarray
    report: EvaluationReport
    norms: np.ndarray
    R: np.ndarray
    scores: np.ndarray
    outlier_mask: np.ndarray
    inlier_labels: np.ndarray
    models: list
    outlier_labels: np.ndarray
    classifications: dict = field(default_factory=dict)
    config: PipelineConfig | None = None

    def __iter__(self):
        return iter((self.G_hat, self.report))

    @property
    def labels(self) -> np.ndarray:
        """Cluster index of every column (clustered inliers and classified outliers)."""
        return np.where(self.outlier_mask, self.outlier_labels, self.inlier_labels)


def _timed(name, timings, fn, *args):
    t0 = time.perf_counter()
    try:
        out = fn(*args)
    except PMSDRError as exc:
        raise StageError(name, exc) from exc
    timings[name] = time.perf_counter() - t0
    log.debug("stage %s: %.3fs", name, timings[name])
    return out


def run_pipeline(G, cfg: PipelineConfig) -> PipelineRun:
    """Detect, cluster, classify and recover the permuted columns of ``G``.

    Any stage failure aborts the run with a :class:`~pmsdr.errors.StageError`
    naming the stage. The report carries timings and run statistics; the
    ground-truth metrics are filled in by :func:`evaluate_run`.
    """
    G = as_data_matrix(G, "data matrix")
    cfg.validate(*G.shape)
    timings = {}
    G_norm, norms = _timed("normalize", timings, normalize_columns, G)
    R = _timed("selfrep", timings, stage_selfrep, G_norm, cfg)
    scores, outliers = _timed("detect", timings, stage_detect, R, cfg)
    inlier_labels, models = _timed("cluster", timings, stage_cluster, G_norm, R, outliers, cfg)
    outlier_labels, results = _timed("classify", timings, stage_classify, G_norm, outliers, models, cfg)
    G_hat_n = _timed("recover", timings, stage_recover, G_norm, outliers, outlier_labels, models, cfg)
    G_hat = rescale_output(G, G_hat_n, norms, outliers)
    report = EvaluationReport(timings=timings, config=cfg.to_dict(), seed=cfg.seed, details={
        "n_columns": int(G.shape[1]),
        "n_detected_outliers": int(outliers.sum()),
        "cluster_sizes": [int(m.sample_count) for m in models],
    })
    return PipelineRun(G_hat, report, norms, R, scores, outliers, inlier_labels, models,
                       outlier_labels, results, cfg)


def evaluate_run(run: PipelineRun, bundle) -> EvaluationReport:
    """Fill all ground-truth metrics of ``run.report`` using ``bundle``.

    * ``uoratio``: true outliers not flagged.
    * ``scerr``: detected inliers whose (aligned) cluster differs from their group.
    * ``ce_recon``: detected outliers whose (aligned) class differs from their group.
    * ``ce_gt``: true outliers classified with the true bases.
    * ``re_gt``: true outliers recovered with the true bases and groups.
    * ``re_recon``: the pipeline's output on the true outlier columns.

    Both recovery errors project each column onto its true subspace before
    comparing with the clean data.
    """
    cfg = run.config
    truth = np.asarray(bundle.labels, dtype=np.int64)
    true_out = np.asarray(bundle.outlier_mask, dtype=bool)
    det_out = run.outlier_mask
    det_in = ~det_out
    if truth.size != det_out.size:
        raise ConfigError("bundle does not match the run's column count")

    n_groups = max(cfg.L, int(truth.max()) + 1)
    mapping, _ = metrics.align_labels(run.inlier_labels[det_in], truth[det_in], n_groups)
    (uoratio, scerr), flags = metrics.auxiliary_metrics(
        det_out, true_out, run.inlier_labels[det_in], truth[det_in], mapping)

    cols = np.flatnonzero(true_out)
    G = bundle.corrupted
    gt_pred = np.array([classify_outlier(G[:, j], bundle.bases, cfg.gamma_retain, cfg.max_iter).label
                        for j in cols], dtype=np.int64)
    (ce_gt, ce_recon), ce_flags = metrics.classification_errors(
        gt_pred, truth[cols], run.outlier_labels[det_out], truth[det_out], mapping)
    flags.update(ce_flags)

    re_gt = re_recon = None
    if cols.size:
        Y = bundle.clean[:, cols]
        G_gt = recover_matrix(G, true_out, truth, bundle.bases, cfg.gamma_retain, cfg.max_iter)
        re_gt, re_recon = metrics.recovery_errors(G_gt[:, cols], run.G_hat[:, cols], Y,
                                                  bundle.bases, truth[cols])
    flags["re_gt"] = flags["re_recon"] = not cols.size

    rep = run.report
    rep.ce_gt, rep.ce_recon, rep.re_gt, rep.re_recon = ce_gt, ce_recon, re_gt, re_recon
    rep.uoratio, rep.scerr = uoratio, scerr
    rep.degenerate = flags
    rep.details["label_mapping"] = mapping.tolist()
    rep.validate()
    return rep


SYNTH_KEYS = tuple(SynthConfig.__dataclass_fields__)
PIPELINE_KEYS = tuple(k for k in PipelineConfig.__dataclass_fields__ if k not in ("seed", "n_out"))


def expand_grid(grid: dict) -> list:
    """Cartesian product of a ``{name: value or list}`` mapping, in key order."""
    if not grid:
        raise ConfigError("grid is empty")
    keys = list(grid)
    values = [v if isinstance(v, (list, tuple)) else [v] for v in grid.values()]
    if any(len(v) == 0 for v in values):
        raise ConfigError("grid axes must be non-empty")
    unknown = set(keys) - set(SYNTH_KEYS) - set(PIPELINE_KEYS)
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def configs_for_point(point: dict, seed: int):
    """Synthetic and pipeline configs for one grid point.

    ``L`` and ``r`` are shared; with the default ``known`` split the
    outlier count is the true one.
    """
    synth = SynthConfig(**{k: v for k, v in point.items() if k in SYNTH_KEYS})
    synth.validate()
    pipe = {k: v for k, v in point.items() if k in PIPELINE_KEYS}
    pipe.setdefault("L", synth.L)
    pipe.setdefault("r", synth.r)
    cfg = PipelineConfig(**pipe, seed=seed)
    if cfg.outlier_split == "known":
        cfg.n_out = synth.outliers_per_group * synth.L
    return synth, cfg


def run_point(point: dict, seed: int) -> EvaluationReport:
    synth, cfg = configs_for_point(point, seed)
    bundle = build_dataset(synth, seed)
    return evaluate_run(run_pipeline(bundle.corrupted, cfg), bundle)


def sweep_columns(grid_keys) -> list:
    cols = list(grid_keys) + ["n_ok", "n_failed"]
    for m in metrics.METRIC_NAMES:
        cols += [f"{m}_{a}" for a in metrics.AGGREGATES]
    return cols + ["errors"]


def sweep(grid: dict, seeds, runner=run_point, threads: int = 1) -> list:
    """Run every grid point for every seed and aggregate the metrics.

    Returns one row (dict) per grid point. A failing ``(point, seed)`` pair
    is counted in ``n_failed`` with its message in ``errors``; the sweep
    continues. ``runner(point, seed)`` must return an
    :class:`~pmsdr.metrics.EvaluationReport`.
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("need at least one seed")
    points = expand_grid(grid)
    jobs = [(i, p, s) for i, p in enumerate(points) for s in seeds]

    def one(job):
        i, p, s = job
        try:
            return i, runner(p, s), None
        except (PMSDRError, ValueError, ArithmeticError) as exc:
            return i, None, f"seed {s}: {type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, jobs))
    else:
        outcomes = [one(j) for j in jobs]

    rows = []
    for i, point in enumerate(points):
        reports = [rep for k, rep, _ in outcomes if k == i and rep is not None]
        errors = [err for k, _, err in outcomes if k == i and err is not None]
        row = dict(point)
        row["n_ok"], row["n_failed"] = len(reports), len(errors)
        for m in metrics.METRIC_NAMES:
            agg = metrics.aggregate([getattr(rep, m) for rep in reports])
            for a in metrics.AGGREGATES:
                row[f"{m}_{a}"] = agg[a]
        row["errors"] = "; ".join(errors)
        rows.append(row)
    return rows

