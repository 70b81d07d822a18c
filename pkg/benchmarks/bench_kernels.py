"""Time the compiled core against the pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Three workloads: one 5(4) trajectory over the Case 1 interference epoch,
a 161 x 121 field slice, and a batch of scalar field evaluations.
"""

import argparse
import json
import math
import timeit

import numpy as np

from cqhj import _backend
from cqhj.scenario import preset

P = preset("case1").superposition().array
LOG_GUARD = math.log(1e-10)


def _workloads(k):
    xs, ys = np.linspace(-4, 4, 161), np.linspace(-3, 3, 121)
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    tt = np.full(zz.shape, 5.0)
    pts = np.random.default_rng(0).uniform(-4, 4, 2000) + 0.5j
    return {
        "trajectory": lambda: k.dopri5(P, 1.0, 1.0, False, complex(-9.11016, -1.17309), 0.0, 10.0,
                                       1e-10, 1e-10, LOG_GUARD, 100000, 1e-14),
        "field_slice": lambda: k.log_sums_grid(P, 1.0, 1.0, zz, tt),
        "scalar_evals": lambda: [k.log_sums(P, 1.0, 1.0, z, 5.0) for z in pts],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args()

    results = {}
    for name in _backend.available():
        for job, fn in _workloads(_backend.get(name)).items():
            fn()  # warm-up
            results.setdefault(job, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))

    print(f"{'workload':<14}" + "".join(f"{n:>12}" for n in _backend.available()) + f"{'speed-up':>10}")
    for job, times in results.items():
        row = f"{job:<14}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in _backend.available())
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
