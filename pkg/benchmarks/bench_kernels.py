"""Time the numba kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--sizes 128 256 512 1024]``.
The numba timings exclude the first (compiling) call.
"""

import argparse
import math
import time

import numpy as np

from qpmdesign import _kernels
from qpmdesign.dispersion import C_UM_PER_PS, axis_model, wavenumber
from qpmdesign.joint_spectrum import PumpPulse

CRYSTAL, T = "KTP", 50.0


def _inputs(n):
    ls = np.linspace(1.575, 1.589, n)
    li = ls.copy()
    ks = wavenumber(CRYSTAL, "o", ls, T)
    ki = wavenumber(CRYSTAL, "e", li, T)
    pm = axis_model(CRYSTAL, "o")
    pulse = PumpPulse(0.791, 2.5)
    g = -2 * math.pi / 46.04
    return (ls, li, pm.packed(), pm.delta_t(T), g, 30000.0, pulse.omega0, pulse.sigma_omega, ks, ki, C_UM_PER_PS)


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; timing the numpy path only")
    print(f"{'grid':>6} {'kernel':>12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for n in args.sizes:
        a = _inputs(n)
        dk_args = (a[0], a[1], a[2], a[3], a[4], a[8], a[9])
        lam = np.linspace(0.4, 3.0, n * n)
        idx_args = (*a[2], lam, a[3])
        for name, py, nb, fargs in (
            ("jsa_grid", _kernels.jsa_grid_py, getattr(_kernels, "jsa_grid_nb", None), a),
            ("delta_k", _kernels.delta_k_grid_py, getattr(_kernels, "delta_k_grid_nb", None), dk_args),
            ("index", _kernels.refractive_index_py, getattr(_kernels, "refractive_index_nb", None), idx_args),
        ):
            t_py = best_of(py, fargs, args.repeat)
            if nb is None:
                print(f"{n:>6} {name:>12} {t_py * 1e3:>10.2f} {'-':>10} {'-':>8} {'-':>11}")
                continue
            nb(*fargs)
            t_nb = best_of(nb, fargs, args.repeat)
            diff = np.max(np.abs(py(*fargs) - nb(*fargs)))
            print(f"{n:>6} {name:>12} {t_py * 1e3:>10.2f} {t_nb * 1e3:>10.2f} {t_py / t_nb:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
