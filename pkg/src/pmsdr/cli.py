"""Command-line interface: ``pmsdr {synth,run,eval,sweep,theory}``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 when
a computation fails.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, pipeline, theory
from .errors import ConfigError, PMSDRError
from .metrics import METRIC_NAMES, EvaluationReport
from .synth import SynthConfig, build_dataset

log = logging.getLogger("pmsdr")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PMSDR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"PMSDR_THREADS must be an integer, got {env!r}")
    return 1


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = fileio.read_json(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def cmd_synth(args) -> int:
    raw = _load_config(args.config)
    seed = args.seed if args.seed is not None else raw.pop("seed", 0)
    raw.pop("seed", None)
    cfg = SynthConfig.from_dict(raw)
    cfg.validate()
    bundle = build_dataset(cfg, seed)
    out = Path(args.out)
    files = fileio.save_bundle(bundle, out)
    fileio.write_manifest(out, "synth", seed, args.config, outputs=files)
    log.info("wrote %d x %d dataset to %s", *bundle.shape, out)
    return EXIT_OK


def _run_config(args, N) -> pipeline.PipelineConfig:
    raw = _load_config(args.config)
    cfg = pipeline.PipelineConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.threads = _threads(args)
    if cfg.outlier_split == "known" and cfg.n_out is None:
        meta = Path(args.data) / "bundle.json"
        if meta.exists():
            cfg.n_out = int(np.sum(fileio.read_json(meta)["outlier_mask"]))
            log.info("using outlier count %d from bundle.json", cfg.n_out)
    cfg.validate(N=N)
    return cfg


def cmd_run(args) -> int:
    G = fileio.load_corrupted(args.data)
    cfg = _run_config(args, G.shape[1])
    run = pipeline.run_pipeline(G, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.verbose:
        run.report.details["classifications"] = {
            str(j): res.to_dict() for j, res in run.classifications.items()}
    files = [out / "G_hat.csv", out / "run.json", out / "report.json"]
    fileio.write_matrix(files[0], run.G_hat)
    fileio.write_json(files[1], {
        "config": cfg.to_dict(),
        "outlier_mask": run.outlier_mask,
        "inlier_labels": run.inlier_labels,
        "outlier_labels": run.outlier_labels,
    })
    fileio.write_json(files[2], run.report.to_dict())
    if args.dump_intermediates:
        inter = out / "intermediates"
        inter.mkdir(exist_ok=True)
        fileio.write_matrix(inter / "R.csv", run.R)
        fileio.write_matrix(inter / "scores.csv", run.scores[None, :])
        fileio.write_matrix(inter / "norms.csv", run.norms[None, :])
        fileio.write_matrix(inter / "bases.csv", np.hstack([m.basis for m in run.models]))
        files.append(inter)
    fileio.write_manifest(out, "run", cfg.seed, args.config, inputs=[args.data], outputs=files)
    return EXIT_OK


def _load_run(run_dir):
    d = Path(run_dir)
    meta = fileio.read_json(d / "run.json")
    cfg = pipeline.PipelineConfig.from_dict(meta["config"])
    report = EvaluationReport.from_dict(fileio.read_json(d / "report.json"))
    return pipeline.PipelineRun(
        G_hat=fileio.read_matrix(d / "G_hat.csv"), report=report, norms=None, R=None, scores=None,
        outlier_mask=np.asarray(meta["outlier_mask"], dtype=bool),
        inlier_labels=np.asarray(meta["inlier_labels"], dtype=np.int64), models=[],
        outlier_labels=np.asarray(meta["outlier_labels"], dtype=np.int64), config=cfg)


def cmd_eval(args) -> int:
    try:
        run = _load_run(args.run)
    except FileNotFoundError as exc:
        raise ConfigError(f"incomplete run directory: {exc}")
    bundle = fileio.load_bundle(args.data)
    if bundle is None:
        log.warning("no ground truth in %s; metrics omitted", args.data)
        report = run.report
        report.details["ground_truth"] = False
    else:
        report = pipeline.evaluate_run(run, bundle)
        report.details["ground_truth"] = True
    out = Path(args.out or args.run)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(out / "metrics.json", report.to_dict())
    fileio.write_rows(out / "metrics.csv", [report.metrics()], list(METRIC_NAMES))
    fileio.write_manifest(out, "eval", report.seed, None, inputs=[args.run, args.data],
                          outputs=[out / "metrics.json", out / "metrics.csv"])
    return EXIT_OK


def _grid_file(path) -> dict:
    try:
        return fileio.read_json(path)
    except FileNotFoundError:
        raise ConfigError(f"grid file not found: {path}")


def cmd_sweep(args) -> int:
    if args.resume:
        raise ConfigError("resuming a sweep is not supported; rerun it from scratch")
    grid_doc = _grid_file(args.grid)
    grid = grid_doc.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("sweep file needs a 'grid' object")
    seeds = grid_doc.get("seeds", [args.seed if args.seed is not None else 0])
    points = pipeline.expand_grid(grid)
    rows = pipeline.sweep(grid, seeds, threads=_threads(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.write_rows(out, rows, pipeline.sweep_columns(points[0].keys()))
    fileio.write_manifest(out.parent, "sweep", seeds, args.grid, inputs=[args.grid], outputs=[out])
    return EXIT_OK


def theory_points(grid_doc: dict) -> list:
    if "points" in grid_doc:
        return [tuple(int(v) for v in p) for p in grid_doc["points"]]
    try:
        return [(int(M), int(M2), int(r)) for M in grid_doc["M"] for M2 in grid_doc["M2"] for r in grid_doc["r"]]
    except KeyError as exc:
        raise ConfigError(f"theory grid needs 'points' or M/M2/r lists (missing {exc})")


def cmd_theory(args) -> int:
    grid_doc = _grid_file(args.grid)
    trials = int(grid_doc.get("trials", 10000))
    seed = args.seed if args.seed is not None else int(grid_doc.get("seed", 0))
    rows = []
    for i, (M, M2, r) in enumerate(theory_points(grid_doc)):
        rows.extend(theory.theory_rows(M, M2, r, trials, [seed, i], threads=_threads(args)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.write_rows(out, rows, list(theory.THEORY_COLUMNS))
    fileio.write_manifest(out.parent, "theory", seed, args.grid, inputs=[args.grid], outputs=[out])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $PMSDR_THREADS or 1)")
    common.add_argument("--verbose", "-v", action="store_true")

    p = _Parser(prog="pmsdr", description="Recover partially permuted columns of union-of-subspaces data.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--config", help="JSON with synthetic-data settings")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", parents=[common], help="run the recovery pipeline")
    s.add_argument("--data", required=True, help="dataset directory (corrupted.csv)")
    s.add_argument("--config", help="JSON with pipeline settings")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--dump-intermediates", action="store_true",
                   help="also write R, scores, norms and estimated bases")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval", parents=[common], help="score a run against ground truth")
    s.add_argument("--run", required=True, help="run output directory")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--out", help="output directory (default: the run directory)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="grid sweep over synthetic settings")
    s.add_argument("--grid", "--config", dest="grid", required=True, help="JSON with 'grid' and 'seeds'")
    s.add_argument("--out", required=True, help="output CSV")
    s.add_argument("--resume", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("theory", parents=[common], help="closed forms vs Monte Carlo")
    s.add_argument("--grid", "--config", dest="grid", required=True,
                   help="JSON with 'points' (or M/M2/r lists) and 'trials'")
    s.add_argument("--out", required=True, help="output CSV")
    s.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"pmsdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"pmsdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PMSDRError, OSError) as exc:
        print(f"pmsdr: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
