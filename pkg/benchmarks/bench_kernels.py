"""Compare the compiled and pure-Python kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json]

Each kernel is timed with ``timeit`` on both backends (best of ``--repeat``).
An end-to-end row times ``hodotherm verify --model tsallis --n 4`` in a fresh
interpreter per backend, selected with ``HODOTHERM_PURE_PYTHON``.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from hodotherm import _kernels_py as py

try:
    from hodotherm import _kernels as cy
except ImportError:
    cy = None

rng = np.random.default_rng(0)
THETA = rng.uniform(-1, 1, 6).tolist()
MATRIX = rng.normal(size=(5, 5)).tolist()
NODES = rng.uniform(-1, 1, 15).tolist()
YS = np.linspace(-20, 20, 10_000)

CASES = {
    "esp (N=6)": lambda k: k.esp(THETA),
    "tsallis_gradient (N=6)": lambda k: k.tsallis_gradient(0.7, THETA),
    "tsallis_hessian (N=6)": lambda k: k.tsallis_hessian(0.7, THETA),
    "det (5x5)": lambda k: k.det(MATRIX),
    "wnl_cofactor_ratios (N=6, 15 nodes)": lambda k: k.wnl_cofactor_ratios(THETA, 2, NODES, 1e-13),
    "brillouin scalar": lambda k: k.brillouin(1.5, 0.37),
    "brillouin_array (10^4)": lambda k: k.brillouin_array(1.5, YS),
}


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def end_to_end(pure: bool) -> float:
    env = dict(os.environ, HODOTHERM_PURE_PYTHON="1" if pure else "0")
    cmd = [sys.executable, "-m", "hodotherm", "verify", "--model", "tsallis", "--n", "4", "--points", "10"]
    start = timeit.default_timer()
    subprocess.run(cmd, env=env, check=True, capture_output=True)
    return timeit.default_timer() - start


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rows = []
    for name, fn in CASES.items():
        t_py = best_time(lambda: fn(py), args.repeat)
        t_cy = best_time(lambda: fn(cy), args.repeat) if cy is not None else None
        rows.append({"kernel": name, "python_s": t_py, "compiled_s": t_cy})
    rows.append({"kernel": "verify tsallis N=4 (process)", "python_s": end_to_end(True),
                 "compiled_s": end_to_end(False) if cy is not None else None})
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':40s} {'python':>12s} {'compiled':>12s} {'speed-up':>9s}")
    for r in rows:
        c = r["compiled_s"]
        cs = f"{c:12.3e}" if c is not None else f"{'n/a':>12s}"
        sp = f"{r['python_s'] / c:9.1f}" if c else f"{'n/a':>9s}"
        print(f"{r['kernel']:40s} {r['python_s']:12.3e} {cs} {sp}")


if __name__ == "__main__":
    main()
