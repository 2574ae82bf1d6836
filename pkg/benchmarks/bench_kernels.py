"""Compare the numba and pure-numpy level kernels.

Run with ``python benchmarks/bench_kernels.py``. Two measurements:

1. one implicit level of the Barenblatt problem, both kernels in-process,
   for a range of mesh sizes (compilation excluded);
2. a full Barenblatt solve (h = 0.02, tau = 5e-4, 2000 levels) in a fresh
   interpreter per backend, selected with ``PMELAB_DISABLE_NUMBA``.
"""

import os
import subprocess
import sys
import timeit

import numpy as np

from pmelab import _kernels
from pmelab.exact import BarenblattParams, barenblatt
from pmelab.solver import SolverConfig

FULL_RUN = """
import time
from pmelab.experiments import barenblatt_run
t = time.perf_counter()
r, _ = barenblatt_run(0.02, 5e-4)
print(time.perf_counter() - t, r["l1_rel_error"])
"""


def level_args(n_cells, tau=5e-4):
    x = np.linspace(-6.0, 6.0, n_cells + 1)
    h = x[1] - x[0]
    uo = barenblatt(x, 1.0, BarenblattParams(2.0))
    m, n_reg, c, coef, dcoef = SolverConfig(m=2.0).kernel_args()
    interior = uo[1:-1]
    return (interior, 0.0, 0.0, np.full(interior.size, -np.inf), tau / h**2, m, n_reg, c, coef, dcoef,
            0.0, float(uo.max()), 1e-10, 50, 1.0, 200_000)


def bench_level():
    print(f"{'cells':>8} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8} {'max |diff|':>11}")
    for n in (150, 600, 2400, 9600):
        args = level_args(n)
        ref = _kernels.solve_level(*args, use_numba=False)[0]
        row = [n]
        t_np = min(timeit.repeat(lambda: _kernels.solve_level(*args, use_numba=False), number=20, repeat=3)) / 20
        if _kernels.numba is not None:
            fast = _kernels.solve_level(*args, use_numba=True)[0]  # compile outside the timing
            t_nb = min(timeit.repeat(lambda: _kernels.solve_level(*args, use_numba=True), number=20, repeat=3)) / 20
            row += [1e3 * t_np, 1e3 * t_nb, t_np / t_nb, float(np.max(np.abs(fast - ref)))]
            print(f"{row[0]:>8} {row[1]:>12.3f} {row[2]:>12.3f} {row[3]:>8.2f} {row[4]:>11.2e}")
        else:
            print(f"{n:>8} {1e3 * t_np:>12.3f} {'n/a':>12}")


def bench_full():
    for label, flag in (("numpy", "1"), ("numba", "0")):
        env = dict(os.environ, PMELAB_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", FULL_RUN], env=env, capture_output=True, text=True, check=True)
        seconds, err = out.stdout.split()
        print(f"full Barenblatt run [{label}]: {float(seconds):.2f} s, relative L1 error {float(err):.3e}")


if __name__ == "__main__":
    bench_level()
    bench_full()
