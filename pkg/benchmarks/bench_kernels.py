"""Time the numba and numpy backends on the two hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--points 2000]

Reports the best wall time per call and per frequency point, and checks the
two backends agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dynhomog import _kernels, fixtures
from dynhomog.spectral import geometry_matrix


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=2000)
    args = ap.parse_args(argv)

    fx = fixtures.test_bilayer()
    d, basis = fx.discretized(), fx.basis()
    q = 1.0
    omegas = np.linspace(0.05, 25.0, args.points)
    batch_args = (
        geometry_matrix(d, basis), d.fractions, d.compliances, d.densities,
        np.flatnonzero(d.active_sigma), np.flatnonzero(d.active_velocity),
        basis.xi, d.cell.period, q, omegas, d.ref.density, d.ref.compliance, 1e-8,
    )
    cell = fixtures.asymmetric_four_layer().cell
    trace_args = (cell.densities, cell.compliances, cell.thicknesses, np.linspace(0.0, 200.0, 50 * args.points))

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    results = {}
    print(f"effective_batch: {d.n_subregions} subregions, n_max={basis.n_max}, {args.points} frequencies")
    print(f"half_trace: {len(cell.layers)} layers, {trace_args[3].size} frequencies\n")
    print(f"{'kernel':<16}{'backend':<9}{'best [s]':>10}{'per point [us]':>17}")
    for name, fn, a, n in (
        ("effective_batch", _kernels.effective_batch, batch_args, omegas.size),
        ("half_trace", _kernels.half_trace, trace_args, trace_args[3].size),
    ):
        for be in backends:
            fn(*a, backend=be)  # compile / warm caches
            t = _best(lambda: fn(*a, backend=be), args.repeat)
            results[(name, be)] = fn(*a, backend=be)
            print(f"{name:<16}{be:<9}{t:>10.4f}{1e6 * t / n:>17.2f}")
        if len(backends) == 2:
            diff = np.nanmax(np.abs(results[(name, "numba")] - results[(name, "numpy")]))
            print(f"{'':<16}max |numba - numpy| = {diff:.2e}")


if __name__ == "__main__":
    main()
