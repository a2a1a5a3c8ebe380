"""Time the self-representation solve with the compiled and pure-Python backends.

Usage: python benchmarks/bench_selfrep.py [--sizes 60 120 240] [--repeats 3]
"""
import argparse
import time

import numpy as np

from pmsdr.numerics import normalize_columns
from pmsdr.selfrep import self_representation
from pmsdr.synth import SynthConfig, build_dataset


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[60, 120, 240],
                    help="number of columns N")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    print(f"{'N':>5} {'cython [s]':>11} {'python [s]':>11} {'speedup':>8} {'max |dR|':>9}")
    for N in args.sizes:
        cfg = SynthConfig(M=50, r=5, L=3, samples_per_group=max(1, N // 3), outlier_ratio=0.3)
        G, _ = normalize_columns(build_dataset(cfg, 0).corrupted)
        tc, Rc = best_of(lambda: self_representation(G, backend="cython"), args.repeats)
        tp, Rp = best_of(lambda: self_representation(G, backend="python"), args.repeats)
        print(f"{G.shape[1]:>5} {tc:>11.3f} {tp:>11.3f} {tp / tc:>8.1f} {np.max(np.abs(Rc - Rp)):>9.1e}")


if __name__ == "__main__":
    main()
