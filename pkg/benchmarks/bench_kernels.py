"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--quick]

Prints one row per kernel with the best-of-N wall time for each backend
and the speedup. Both backends produce identical results, which is
checked before timing.
"""

import argparse
import time

import numpy as np

from rf2nn import _backend
from rf2nn.data import compute_feature_stats, make_synthetic
from rf2nn.datagen import GenerationConfig
from rf2nn.forest import TreeTrainParams, train_forest


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(quick):
    ds = make_synthetic("two_moons", 2000 if quick else 5000, n_features=8, noise=0.4, seed=0)
    rf = train_forest(ds, 10 if quick else 25, TreeTrainParams(max_depth=10), seed=0)
    stats = compute_feature_stats(ds.features)
    cfg = GenerationConfig(seed=0)
    idx = np.arange(len(ds), dtype=np.int64)
    feats = np.arange(ds.feature_count, dtype=np.int64)
    X = ds.features
    n_gen = 500 if quick else 3000
    return {
        "best_split": lambda k: k.best_split(X, ds.labels, idx, feats, ds.class_count),
        "predict_batch": lambda k: k.predict_batch(rf.packed, X),
        "generate_batch": lambda k: k.generate_batch(
            rf.packed, rf.packed_class_weights, stats.sampling_arrays(), cfg.kernel_params(),
            0, 0, n_gen),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    py = _backend.get("python")
    try:
        cy = _backend.get("cython")
    except ImportError:
        print("compiled extension not built; only the Python backend is available")
        cy = None

    print(f"{'kernel':<16}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, run in cases(args.quick).items():
        if cy is not None:
            a, b = run(py), run(cy)
            same = all(np.array_equal(u, v) for u, v in zip(a, b)) if isinstance(a, tuple) \
                else np.array_equal(a, b)
            if not same:
                raise SystemExit(f"{name}: backends disagree")
        t_py = best_time(lambda: run(py), args.repeat)
        if cy is None:
            print(f"{name:<16}{t_py:>12.4f}{'-':>12}{'-':>10}")
            continue
        t_cy = best_time(lambda: run(cy), args.repeat)
        print(f"{name:<16}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
