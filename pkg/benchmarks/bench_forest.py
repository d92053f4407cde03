"""Time forest fitting and prediction for the compiled and pure-Python kernels.

    python3 benchmarks/bench_forest.py --trees 50 --rows 800 --repeat 3

Both backends fit the same data with the same seed; the script checks that
they produce identical forests before reporting timings.
"""
import argparse
import time

import numpy as np

from ctxhar.shallow import encode_batch, rf_fit
from ctxhar.shallow._kernels import get_kernels
from ctxhar.shallow.forest import rf_votes
from ctxhar.simgen import default_scenario, generate


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trees", type=int, default=50)
    ap.add_argument("--rows", type=int, default=800, help="training rows (a prefix of the generated data)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    spec = default_scenario(seed=args.seed)
    data = generate(spec)
    X = encode_batch(data.pi, data.step, spec.n_steps)[: args.rows]
    y = data.cls[: args.rows]

    backends = ["python"]
    try:
        get_kernels("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the Python kernels only")

    results = {}
    for be in backends:
        fit_t, model = _best_of(
            lambda: rf_fit(X, y, trees=args.trees, seed=args.seed, n_jobs=args.jobs, backend=be), args.repeat)
        pred_t, votes = _best_of(lambda: rf_votes(model, X, backend=be), args.repeat)
        results[be] = (fit_t, pred_t, model, votes)
        print(f"{be:>7}: fit {fit_t:8.3f} s   predict {pred_t:8.3f} s   ({args.trees} trees, {len(X)} rows)")

    if len(results) == 2:
        a, b = results["cython"], results["python"]
        same = all(np.array_equal(getattr(a[2], n), getattr(b[2], n))
                   for n in ("feature", "threshold", "left", "right", "counts")) and np.array_equal(a[3], b[3])
        print(f"identical forests and votes: {same}")
        print(f"speed-up: fit x{b[0] / a[0]:.1f}   predict x{b[1] / a[1]:.1f}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
