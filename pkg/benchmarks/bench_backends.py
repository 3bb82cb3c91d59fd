"""Compare the numba and numpy influence-kernel backends.

Generates ICR datasets of increasing size and times influence_values
(the only hot inner loop) under each backend. Run:

    python3 benchmarks/bench_backends.py
"""

import os
import time

import numpy as np

from aumcf import ScenarioConfig, generate_dataset
from aumcf._kernels import BACKEND_ENV, HAS_NUMBA
from aumcf.inference import influence_values


def time_backend(arm, tau, backend, repeats=5):
    os.environ[BACKEND_ENV] = backend
    influence_values(arm, tau)  # warm up (JIT compile on first numba call)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        influence_values(arm, tau)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    tau = 4.0
    print(f"{'n':>8} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>8}")
    for n in (200, 1000, 5000, 20000, 100000):
        cfg = ScenarioConfig(kind="icr", n_per_arm=n, tau=tau, seed=1)
        arm = generate_dataset(cfg, 0).arm1
        t_np = time_backend(arm, tau, "numpy")
        if HAS_NUMBA:
            t_nb = time_backend(arm, tau, "numba")
            print(f"{n:>8} {1e3 * t_np:>12.3f} {1e3 * t_nb:>12.3f} "
                  f"{t_np / t_nb:>8.2f}x")
        else:
            print(f"{n:>8} {1e3 * t_np:>12.3f} {'n/a':>12} {'n/a':>8}")
    os.environ.pop(BACKEND_ENV, None)


if __name__ == "__main__":
    main()
