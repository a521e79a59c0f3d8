#!/usr/bin/env python3
"""Time the jitted kernels against their pure-numpy fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The dispatch inside the package follows QROOT_NUMBA; this script calls
both implementations directly so a single process covers the comparison.
"""

import time

import numpy as np

from qroot import _kernels


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up (includes jit compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, numba_fn, numpy_fn, args):
    if not _kernels.HAVE_NUMBA:
        t_np = timeit(numpy_fn, *args)
        print(f"{name:<28} numpy {t_np * 1e3:9.3f} ms   (numba unavailable)")
        return
    t_nb = timeit(numba_fn, *args)
    t_np = timeit(numpy_fn, *args)
    print(f"{name:<28} numba {t_nb * 1e3:9.3f} ms   numpy {t_np * 1e3:9.3f} ms"
          f"   speedup {t_np / t_nb:6.2f}x")


def main():
    rng = np.random.default_rng(0)

    coeffs = np.ascontiguousarray(rng.standard_normal(2000))
    xs = np.ascontiguousarray(rng.uniform(-1, 1, 20000))
    row("clenshaw deg=2000 n=20k",
        getattr(_kernels, "_clenshaw_nb", None), _kernels.clenshaw_numpy,
        (coeffs, xs))

    d = np.ascontiguousarray(rng.uniform(0.1, 0.9, 4096).astype(np.complex128))
    v0 = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    row("power-iteration diag 4096",
        getattr(_kernels, "_power_diag_nb", None),
        _kernels.power_iteration_diag_numpy, (d, v0, 20000, 1e-7, 32))

    a = rng.standard_normal((256, 256))
    a = np.ascontiguousarray(((a + a.T) / 40 + np.eye(256)).astype(np.complex128))
    v1 = rng.standard_normal(256) + 0j
    row("power-iteration dense 256",
        getattr(_kernels, "_power_dense_nb", None),
        _kernels.power_iteration_dense_numpy, (a, v1, 5000, 1e-9, 32))

    pts = np.ascontiguousarray(rng.uniform(-1, 1, size=(4096, 3)))
    c = np.ascontiguousarray(rng.standard_normal(8))
    e = np.ascontiguousarray(rng.integers(0, 6, size=(8, 3)))
    row("monomial grid 4096x8 terms",
        getattr(_kernels, "_monomial_nb", None), _kernels.monomial_grid_numpy,
        (pts, c, e))


if __name__ == "__main__":
    main()
