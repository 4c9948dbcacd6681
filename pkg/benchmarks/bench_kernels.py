#!/usr/bin/env python3
"""Time the hot kernels with numba and with the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each path runs in its own interpreter (the switch is read at import time);
numba timings exclude the first, compiling call.
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, timeit
import numpy as np
from oulab import _kernels
from oulab.eigenfn import solve_1d, residual_generator_1d
from oulab.ou_model import Spec1D

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
ts = np.cumsum(rng.uniform(0.005, 0.02, 4000))
y, dy, d2y = (rng.standard_normal(4000) + 0j for _ in range(3))
x = rng.uniform(ts[0], ts[-1], 200_000)
spec = Spec1D(gamma=-1.0, q=1.0)

cases = {
    "hermite5 (200k points)": lambda: _kernels.hermite5(ts, y, dy, d2y, x),
    "integrate_linear2 (cos, t in [0, 30])":
        lambda: _kernels.integrate_linear2(0, 0, 0, 1.0, 0.0, 30.0, 1.0, 0.0),
    "solve_1d + residual (lam = -0.7+0.4i)":
        lambda: residual_generator_1d(spec, solve_1d(spec, -0.7 + 0.4j)),
}
out = {}
for name, fn in cases.items():
    fn()  # warm-up / compile
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps({"numba": _kernels.USE_NUMBA, "times": out}))
"""


def run(disable, repeat):
    env = dict(os.environ, OULAB_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if not fast["numba"]:
        print("numba not available; both columns are the numpy path")
    width = max(map(len, fast["times"]))
    print(f"{'kernel':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<{width}}  {t_fast:10.4f}  {t_slow:10.4f}  {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
