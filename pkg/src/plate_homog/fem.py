"""Trilinear finite elements on uniform periodic grids and slabs.

Shared discretization for the unit-cell and slab corrector problems and
for the dense oracles:

- trilinear (Q1) displacement elements on a uniform grid,
- 2x2x2 Gauss quadrature per cell, which integrates the energy of a
  trilinear field with cellwise-constant material exactly.  Exactness
  makes nested mesh refinement produce non-increasing corrector
  energies, which the monotonicity checks rely on,
- cell-centered material sampling (one 6x6 Mandel matrix per cell),
- periodic node identification on all axes (cell grids) or on the two
  in-plane axes only (slab grids, natural boundary across thickness).

Strains live in Mandel coordinates throughout, so each quadrature point
contributes ``w_q * (g + B_q u)^T C (g + B_q u)`` to the energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import SQRT2
from .errors import SolverError
from . import kernels

GAUSS_OFFSET = 0.5 / np.sqrt(3.0)


def _gauss_points_1d():
    return (0.5 - GAUSS_OFFSET, 0.5 + GAUSS_OFFSET)


def build_b_matrices(h) -> np.ndarray:
    """Strain-displacement matrices (8, 6, 24) at the 2x2x2 Gauss points.

    Local node ``a = 4*da + 2*db + dc`` sits at offset ``(da, db, dc)``
    of the cell; dof ``3*a + m`` is its displacement component ``m``.
    Rows are Mandel strain slots (11, 22, 33, s2*23, s2*13, s2*12).
    """
    h = np.asarray(h, dtype=float)
    pts = _gauss_points_1d()
    B = np.zeros((8, 6, 24))
    for qi, (x0, x1, x2) in enumerate(product(pts, repeat=3)):
        for a, (da, db, dc) in enumerate(product((0, 1), repeat=3)):
            f0, d0 = (x0, 1.0) if da else (1.0 - x0, -1.0)
            f1, d1 = (x1, 1.0) if db else (1.0 - x1, -1.0)
            f2, d2 = (x2, 1.0) if dc else (1.0 - x2, -1.0)
            g0 = d0 * f1 * f2 / h[0]
            g1 = f0 * d1 * f2 / h[1]
            g2 = f0 * f1 * d2 / h[2]
            col = 3 * a
            B[qi, 0, col + 0] = g0
            B[qi, 1, col + 1] = g1
            B[qi, 2, col + 2] = g2
            B[qi, 3, col + 1] = g2 / SQRT2
            B[qi, 3, col + 2] = g1 / SQRT2
            B[qi, 4, col + 0] = g2 / SQRT2
            B[qi, 4, col + 2] = g0 / SQRT2
            B[qi, 5, col + 0] = g1 / SQRT2
            B[qi, 5, col + 1] = g0 / SQRT2
    return B


@dataclass(frozen=True, eq=False)
class Grid:
    """Element topology: gather indices, quadrature, node layout."""

    kind: str                 # "cell" (fully periodic) or "slab"
    shape: tuple              # cells per axis
    node_shape: tuple
    idx: np.ndarray           # (ncells, 8) int64 node indices
    B: np.ndarray             # (8, 6, 24)
    wq: np.ndarray            # (8,) quadrature weights including cell volume
    h: tuple
    x3q: np.ndarray | None = None   # (ncells, 8) thickness coordinate, slab only

    @property
    def ncells(self) -> int:
        return self.idx.shape[0]

    @property
    def nnodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def ndofs(self) -> int:
        return 3 * self.nnodes


def build_cell_grid(n1: int, n2: int, n3: int) -> Grid:
    """Fully periodic unit-cell grid with n1*n2*n3 cells (= nodes)."""
    if min(n1, n2, n3) < 1:
        raise ValueError("grid sizes must be at least 1 per axis")
    h = (1.0 / n1, 1.0 / n2, 1.0 / n3)
    i, j, k = np.meshgrid(np.arange(n1), np.arange(n2), np.arange(n3), indexing="ij")
    idx = np.empty((n1 * n2 * n3, 8), dtype=np.int64)
    for a, (da, db, dc) in enumerate(product((0, 1), repeat=3)):
        idx[:, a] = (
            ((i + da) % n1) * n2 * n3 + ((j + db) % n2) * n3 + ((k + dc) % n3)
        ).ravel()
    vol = h[0] * h[1] * h[2]
    wq = np.full(8, vol / 8.0)
    return Grid(
        kind="cell",
        shape=(n1, n2, n3),
        node_shape=(n1, n2, n3),
        idx=idx,
        B=build_b_matrices(h),
        wq=wq,
        h=h,
    )


def build_slab_grid(n1: int, n2: int, n3: int) -> Grid:
    """Slab grid: periodic in the two in-plane axes, free across thickness.

    Axis order is (y1, y2, x3); the thickness axis has ``n3`` cells and
    ``n3 + 1`` node planes over ``[-1/2, 1/2]``.
    """
    if min(n1, n2, n3) < 1:
        raise ValueError("grid sizes must be at least 1 per axis")
    h = (1.0 / n1, 1.0 / n2, 1.0 / n3)
    nplanes = n3 + 1
    i, j, k = np.meshgrid(np.arange(n1), np.arange(n2), np.arange(n3), indexing="ij")
    idx = np.empty((n1 * n2 * n3, 8), dtype=np.int64)
    for a, (da, db, dc) in enumerate(product((0, 1), repeat=3)):
        idx[:, a] = (
            ((i + da) % n1) * n2 * nplanes + ((j + db) % n2) * nplanes + (k + dc)
        ).ravel()
    vol = h[0] * h[1] * h[2]
    wq = np.full(8, vol / 8.0)
    pts = _gauss_points_1d()
    x3q = np.empty((n1 * n2 * n3, 8))
    kflat = k.ravel()
    for qi, (_, _, x2) in enumerate(product(pts, repeat=3)):
        x3q[:, qi] = -0.5 + (kflat + x2) * h[2]
    return Grid(
        kind="slab",
        shape=(n1, n2, n3),
        node_shape=(n1, n2, nplanes),
        idx=idx,
        B=build_b_matrices(h),
        wq=wq,
        h=h,
        x3q=x3q,
    )


class ElementOperator:
    """Stiffness operator ``K = sum_c sum_q w_q B_q^T C_c B_q`` plus
    the load/energy helpers built from the same quadrature."""

    def __init__(self, grid: Grid, cellC: np.ndarray, backend: str | None = None):
        cellC = np.ascontiguousarray(cellC, dtype=float)
        if cellC.shape != (grid.ncells, 6, 6):
            raise ValueError(
                f"material array must be ({grid.ncells}, 6, 6), got {cellC.shape}"
            )
        self.grid = grid
        self.cellC = cellC
        self.backend = kernels.resolve_backend(backend)
        self._matvec = kernels.get_matvec(self.backend)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x2 = np.ascontiguousarray(x.reshape(self.grid.nnodes, 3))
        y = self._matvec(x2, self.grid.idx, self.cellC, self.grid.B, self.grid.wq)
        return y.reshape(x.shape)

    def _load_field(self, gload) -> np.ndarray:
        """Broadcast a load strain to (ncells, 8, 6)."""
        g = np.asarray(gload, dtype=float)
        if g.shape == (6,):
            return np.broadcast_to(g, (self.grid.ncells, 8, 6))
        if g.shape == (self.grid.ncells, 8, 6):
            return g
        raise ValueError(f"load strain must have shape (6,) or (ncells, 8, 6), got {g.shape}")

    def rhs(self, gload) -> np.ndarray:
        """Nodal load vector ``f[v] = sum w_q (B_q v)^T C_c g(c, q)``."""
        g = self._load_field(gload)
        s = np.einsum("cij,cqj->cqi", self.cellC, g)
        ylocal = np.einsum("qij,cqi,q->cj", self.grid.B, s, self.grid.wq)
        y = np.zeros((self.grid.nnodes, 3))
        np.add.at(y, self.grid.idx, ylocal.reshape(self.grid.ncells, 8, 3))
        return y.ravel()

    def rhs_noise_floor(self, gload) -> float:
        """Norm threshold below which an assembled load is cancellation dust.

        Materials with no coupling between the load strain and some
        displacement components produce load entries that are exact
        zeros up to rounding; iterating CG on such noise diverges.  The
        same assembly run on absolute values bounds the magnitude that
        went into each entry, so anything at 1e-12 of it is noise (the
        true cancellation error sits near 1e-16 of it).
        """
        g = np.abs(self._load_field(gload))
        s = np.einsum("cij,cqj->cqi", np.abs(self.cellC), g)
        ylocal = np.einsum("qij,cqi,q->cj", np.abs(self.grid.B), s, self.grid.wq)
        y = np.zeros((self.grid.nnodes, 3))
        np.add.at(y, self.grid.idx, ylocal.reshape(self.grid.ncells, 8, 3))
        return 1e-12 * float(np.linalg.norm(y.ravel()))

    def strains(self, x: np.ndarray, gload=None) -> np.ndarray:
        """Total Mandel strain (ncells, 8, 6) of nodal field plus load."""
        u = x.reshape(self.grid.nnodes, 3)[self.grid.idx].reshape(self.grid.ncells, 24)
        g = np.einsum("qij,cj->cqi", self.grid.B, u)
        if gload is not None:
            g = g + self._load_field(gload)
        return g

    def energy(self, x: np.ndarray, gload=None) -> float:
        g = self.strains(x, gload)
        return float(np.einsum("cqi,cij,cqj,q->", g, self.cellC, g, self.grid.wq))

    def energy_bilinear(self, x1, g1, x2, g2) -> float:
        ga = self.strains(x1, g1)
        gb = self.strains(x2, g2)
        return float(np.einsum("cqi,cij,cqj,q->", ga, self.cellC, gb, self.grid.wq))


def iteration_cap(ndofs: int) -> int:
    """Default conjugate-gradient iteration budget for a problem size."""
    return max(200, int(50 * ndofs ** (1.0 / 3.0) * 100))


def conjugate_gradient(op: ElementOperator, b: np.ndarray, tol: float, maxiter=None,
                       noise_floor: float = 0.0, x0: np.ndarray | None = None):
    """Plain CG on the singular-consistent stiffness system.

    The operator kernel is the hot path; everything here is cheap vector
    arithmetic.  Starting from zero keeps the iterates orthogonal to the
    rigid translations (the load is too), so no explicit gauge is needed
    during the iteration.  ``noise_floor`` is an absolute norm below
    which load or residual count as assembled-to-zero (see
    ``ElementOperator.rhs_noise_floor``): loads under it get the zero
    corrector, and a CG breakdown under it counts as converged.
    Returns ``(x, iterations, residual_history)`` with relative
    residuals; raises SolverError with the history otherwise.
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if maxiter is None:
        maxiter = iteration_cap(b.size)
    bnorm = float(np.linalg.norm(b))
    if bnorm <= noise_floor:
        return np.zeros_like(b), 0, (0.0,)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
        r = b - op.matvec(x)
    p = r.copy()
    rs = float(r @ r)
    history = []
    for it in range(1, maxiter + 1):
        Ap = op.matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            # Krylov direction fell into the numerical nullspace: fine if
            # the residual is already at assembly noise, fatal otherwise.
            if np.sqrt(rs) <= noise_floor:
                history.append(float(np.sqrt(rs) / bnorm))
                return x, it, tuple(history)
            raise SolverError(
                f"conjugate gradients broke down at iteration {it} "
                f"(direction energy {pAp:.3e}, residual {np.sqrt(rs):.3e})",
                residuals=history,
            )
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_next = float(r @ r)
        rel = float(np.sqrt(rs_next) / bnorm)
        history.append(rel)
        if rel <= tol or np.sqrt(rs_next) <= noise_floor:
            return x, it, tuple(history)
        if not np.isfinite(rel) or rel > 1e8:
            raise SolverError(
                f"conjugate gradients diverged (residual {rel:.3e} at iteration {it})",
                residuals=history,
            )
        p = r + (rs_next / rs) * p
        rs = rs_next
    raise SolverError(
        f"conjugate gradients did not reach tol={tol:g} in {maxiter} iterations "
        f"(last residual {history[-1]:.3e})",
        residuals=history,
    )


def subtract_nodal_mean(x: np.ndarray, nnodes: int) -> np.ndarray:
    """Zero-mean gauge: remove the average of each displacement component."""
    x2 = x.reshape(nnodes, 3)
    return (x2 - x2.mean(axis=0)).ravel()
