"""Benchmark the compiled kernels against the pure-Python fallback.

Usage:  python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import random
import time
from importlib import resources

from sliceguard import _kernels_py

try:
    from sliceguard import _kernels
except ImportError:
    _kernels = None


def time_fn(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def bench_margins(backend, rows):
    doc = json.loads(
        resources.files("sliceguard").joinpath("assets", "bundled_model.json").read_text("utf-8")
    )
    feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
    for tree in doc["trees"]:
        base = len(feats)
        roots.append(base)
        feats.extend(tree["feature"])
        thrs.extend(tree["threshold"])
        lefts.extend(base + i for i in tree["left"])
        rights.extend(base + i for i in tree["right"])
        vals.extend(tree["value"])
    batch = backend.make_margin_batch_fn(feats, thrs, lefts, rights, vals, roots, doc["bias"])
    return lambda: batch(rows)


def bench_nvs(backend, ttis: int):
    kinds = [1, 1, 0, 1]
    reserves = [0.4, 0.3, 12.0, 0.2]
    refs = [1.0, 1.0, 36.0, 1.0]
    max_prbs = [500, 500, 11, 500]

    def run():
        emas = [0.0, 0.0, 0.0, 0.0]
        for _ in range(ttis):
            granted = backend.nvs_grants(
                kinds, reserves, refs, emas, max_prbs, 106, 106, 0.01, 1.132, 1, 1e-6
            )
            emas = [
                0.99 * e + 0.01 * (g * 1.132 if k == 0 else g / 106)
                for e, g, k in zip(emas, granted, kinds)
            ]

    return run


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--rows", type=int, default=20_000)
    parser.add_argument("--ttis", type=int, default=10_000)
    args = parser.parse_args()

    rng = random.Random(0)
    doc = json.loads(
        resources.files("sliceguard").joinpath("assets", "bundled_model.json").read_text("utf-8")
    )
    n_features = len(doc["schema"])
    rows = [[rng.uniform(0, 10) for _ in range(n_features)] for _ in range(args.rows)]

    cases = [
        (f"tree-ensemble margins ({args.rows} rows x 30 trees)", bench_margins, (rows,)),
        (f"NVS grant loop ({args.ttis} TTIs, 4 slices, 106 PRBs)", bench_nvs, (args.ttis,)),
    ]
    print(f"{'kernel':<45} {'python':>10} {'cython':>10} {'speedup':>8}")
    for label, factory, extra in cases:
        t_py = time_fn(factory(_kernels_py, *extra), args.repeat)
        if _kernels is not None:
            t_cy = time_fn(factory(_kernels, *extra), args.repeat)
            print(f"{label:<45} {t_py*1e3:>8.1f}ms {t_cy*1e3:>8.1f}ms {t_py/t_cy:>7.1f}x")
        else:
            print(f"{label:<45} {t_py*1e3:>8.1f}ms {'n/a':>10} {'—':>8}")
    if _kernels is None:
        print("compiled extension not built; showing pure-Python timings only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
