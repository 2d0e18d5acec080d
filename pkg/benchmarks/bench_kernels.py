"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from crashshap import kernels
from crashshap.models import GbdtConfig, fit_gbdt
from crashshap.explain import tree_shap_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=20000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n, p, nb = args.rows, 25, 32
    bins = rng.integers(0, nb, size=(n, p)).astype(np.uint8)
    grad, hess = rng.normal(size=n), rng.random(n) * 0.25
    rows = np.arange(n, dtype=np.intp)
    x = rng.random((2000, 10))
    y = (x[:, 0] + x[:, 1] * x[:, 2] + 0.3 * rng.random(2000) > 0.9).astype(int)
    cfg = GbdtConfig(n_trees=50, max_leaves=31)
    names = [m.NAME for m in kernels.available_backends()]
    model = fit_gbdt((x, y), cfg)

    cases = {
        "build_histogram": lambda: kernels.backend.build_histogram(bins, grad, hess, rows, nb),
        "best_split": lambda: kernels.backend.best_split(*hist, np.full(p, nb), 1.0, 1e-3),
        "fit_gbdt (2000x10, 50 trees)": lambda: fit_gbdt((x, y), cfg),
        "tree_shap_matrix (2000 rows)": lambda: tree_shap_matrix(model, x),
    }
    results = {}
    for name in names:
        prev = kernels.use(name)
        try:
            hist = kernels.backend.build_histogram(bins, grad, hess, rows, nb)
            for case, fn in cases.items():
                results[case, name] = best_of(fn, args.repeat)
        finally:
            kernels.use(prev)

    print(f"{'kernel':32s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for case in cases:
        line = f"{case:32s}" + "".join(f"{results[case, n] * 1e3:10.2f}ms" for n in names)
        if len(names) > 1:
            line += f"{results[case, 'python'] / results[case, names[0]]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
