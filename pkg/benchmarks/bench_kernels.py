"""Time each hot kernel under the numba and numpy backends at desk-scale sizes.

Run ``python benchmarks/bench_kernels.py [--repeat N]``. The first numba call
(JIT compilation) is excluded from the timings. The script also reports the
largest difference between the two backends for every kernel.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from weakmeas import kernels
from weakmeas._backend import NUMBA_AVAILABLE, use_backend
from weakmeas.gabor_space import PhaseGrid
from weakmeas.phase_grid import make_grid
from weakmeas.quantum_state import make_test_state


def _cases():
    grid = make_grid(-8.0, 8.0, 512)
    psi = make_test_state("two_peak", grid, momentum=0.3).amplitudes
    pg = PhaseGrid.square(6.0, 96)
    field = kernels.gabor_analysis(psi, grid.x, grid.dx, pg.a1, pg.a2)
    fine = np.repeat(psi, 4) * (grid.dx / 4)
    xq = np.linspace(-7.5, 7.5, 200_000)
    return {
        "gabor_analysis 512 x 96^2": lambda: kernels.gabor_analysis(psi, grid.x, grid.dx, pg.a1, pg.a2),
        "gabor_synthesis 96^2 -> 512": lambda: kernels.gabor_synthesis(field, pg.a1, pg.a2, grid.x),
        "reproducing_kernel 96^2": lambda: kernels.reproducing_kernel(field, pg.a1, pg.a2),
        "smeared_density 96^2": lambda: kernels.smeared_density(
            fine, grid.x_min, grid.dx / 4, grid.x, grid.dx, pg.a1, pg.a2, 0.67, 1.5, 2.0
        ),
        "cubic_interp 2e5 points": lambda: kernels.cubic_interp(psi, grid.x_min, grid.dx, xq),
    }


def _best(fn, repeat: int) -> tuple[float, np.ndarray]:
    result = fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy backend can be timed")
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in _cases().items():
        with use_backend("numpy"):
            t_np, ref = _best(fn, args.repeat)
        if NUMBA_AVAILABLE:
            with use_backend("numba"):
                t_nb, out = _best(fn, args.repeat)
            diff = float(np.max(np.abs(out - ref)))
            print(f"{name:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:11.2e}")
        else:
            print(f"{name:32s} {t_np:10.4f} {'-':>10s}")


if __name__ == "__main__":
    main()
