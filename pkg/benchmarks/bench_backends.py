#!/usr/bin/env python3
"""Benchmark the numba and numpy element-operator backends.

The corrector solves are dominated by the stiffness matvec inside CG;
this script times raw matvecs and one full corrector solve per backend
on a two-phase unit cell.

    python benchmarks/bench_backends.py --n 24 --reps 30
"""

import argparse
import time

import numpy as np

from plate_homog import CellMaterial3, MaterialBounds, corrector_solve_3d, qf_isotropic
from plate_homog.fem import ElementOperator, build_cell_grid
from plate_homog.kernels import available_backends


def two_phase_cell(n: int) -> CellMaterial3:
    soft = qf_isotropic(1.0, 0.0).matrix
    hard = qf_isotropic(3.0, 0.5).matrix
    c = np.empty((n, n, n, 6, 6))
    c[:] = soft
    half = n // 2
    c[:half, :half, :] = hard
    eig = np.linalg.eigvalsh(np.stack([soft, hard]))
    return CellMaterial3(c=c, bounds=MaterialBounds(eig[:, 0].min(), eig[:, -1].max()))


def bench_matvec(material: CellMaterial3, backend: str, reps: int) -> float:
    grid = build_cell_grid(*material.grid_shape)
    op = ElementOperator(grid, material.flat(), backend=backend)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(grid.ndofs)
    op.matvec(x)  # warm up (JIT compile / first-touch)
    t0 = time.perf_counter()
    for _ in range(reps):
        op.matvec(x)
    return (time.perf_counter() - t0) / reps


def bench_solve(material: CellMaterial3, backend: str, tol: float) -> tuple:
    E = np.array([1.0, 0.0, 0.0, 0.0, 0.3, 0.0])
    t0 = time.perf_counter()
    corr, energy = corrector_solve_3d(material, E, tol=tol, backend=backend)
    return time.perf_counter() - t0, corr.iterations, energy


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=24, help="cells per axis")
    ap.add_argument("--reps", type=int, default=30, help="matvec repetitions")
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()

    material = two_phase_cell(args.n)
    ncells = args.n**3
    print(f"two-phase cell {args.n}^3 ({ncells} cells, {3 * ncells} dofs)")
    print(f"{'backend':>8} {'matvec [ms]':>12} {'solve [s]':>10} {'iters':>6} {'energy':>12}")

    results = {}
    for backend in available_backends():
        tv = bench_matvec(material, backend, args.reps)
        ts, iters, energy = bench_solve(material, backend, args.tol)
        results[backend] = tv
        print(f"{backend:>8} {1e3 * tv:12.3f} {ts:10.3f} {iters:6d} {energy:12.6f}")

    if "numba" in results and "numpy" in results:
        print(f"numba speedup on matvec: {results['numpy'] / results['numba']:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
