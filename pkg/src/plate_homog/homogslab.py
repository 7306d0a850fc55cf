"""Slab homogenization: thickness period comparable to the in-plane one.

Pipeline for this scaling:

1. ``fiber_reduce``: at each material point, relax the out-of-plane
   response over zero-mean through-fiber fluctuations ``d(y3)``.  The
   stationarity condition makes the out-of-plane stress constant along
   the fiber, which gives a closed form built from the fiber averages
   ``<P>``, ``<S^-1>``, ``<S^-1 T>`` and ``<T^T S^-1 T>`` of the
   in-plane / out-of-plane / coupling blocks.
2. Solve six corrector problems on the slab ``I x Y^2`` (periodic
   in-plane, traction-free thickness faces) with the reduced material:
   three constant mid-plane loads and three thickness-linear curvature
   loads.
3. Assemble the 6x6 energy matrix of the (curvature, mid-plane) pair
   from the stored correctors and eliminate the mid-plane block by a
   Schur complement.

For a zero-Poisson isotropic laminate the fiber reduction has the
classical closed form (arithmetic mean in plane, harmonic mean across),
kept in ``laminate_reduced_form`` as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import time

import numpy as np

from .core import (
    EMBED_2_TO_3,
    IN_PLANE,
    OUT_OF_PLANE,
    EffectiveReport,
    MaterialBounds,
    QuadForm2,
    QuadForm3,
    qf_isotropic,
)
from .errors import AdmissibilityError, DegenerateMaterialError
from .fem import ElementOperator, build_slab_grid, conjugate_gradient, subtract_nodal_mean

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FiberMaterial:
    """6x6 Mandel samples along the through-fiber coordinate ``y3``.

    ``weights`` are the layer fractions (uniform cells by default); they
    must be positive and sum to one.
    """

    c: np.ndarray             # (nf, 6, 6)
    bounds: MaterialBounds
    weights: np.ndarray | None = None

    def __post_init__(self):
        c = np.ascontiguousarray(self.c, dtype=float)
        if c.ndim != 3 or c.shape[1:] != (6, 6):
            raise ValueError(f"fiber samples must be (nf, 6, 6), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        if self.weights is None:
            w = np.full(c.shape[0], 1.0 / c.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (c.shape[0],):
                raise ValueError("weights must match the number of fiber samples")
            if np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be positive and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def nsamples(self) -> int:
        return self.c.shape[0]

    def check(self, rtol: float = 1e-9) -> None:
        eig = np.linalg.eigvalsh(self.c)
        tol = rtol * max(self.bounds.eta2, 1.0)
        if eig[:, 0].min() < self.bounds.eta1 - tol:
            raise AdmissibilityError(
                f"fiber sample eigenvalue {eig[:, 0].min():.6g} below eta1={self.bounds.eta1:.6g}"
            )
        if eig[:, -1].max() > self.bounds.eta2 + tol:
            raise AdmissibilityError(
                f"fiber sample eigenvalue {eig[:, -1].max():.6g} above eta2={self.bounds.eta2:.6g}"
            )


def fiber_reduce(fiber: FiberMaterial) -> QuadForm3:
    """Relax a fiber of 3D forms over zero-mean out-of-plane fluctuations.

    The result is again a quadratic form on symmetric 3x3 arguments.  In
    block form (p = in-plane, o = out-of-plane Mandel slots) the reduced
    matrix is::

        pp: <P> - <T^T S^-1 T> + G^T H^-1 G
        po: G^T H^-1
        oo: H^-1

    with ``H = <S^-1>`` and ``G = <S^-1 T>``, where ``T`` maps in-plane
    strain to out-of-plane stress.  A constant fiber is returned
    unchanged (the zero-mean constraint forces the fluctuation to zero).
    """
    p, o = list(IN_PLANE), list(OUT_OF_PLANE)
    w = fiber.weights
    Pbar = np.zeros((3, 3))
    H = np.zeros((3, 3))
    G = np.zeros((3, 3))
    W = np.zeros((3, 3))
    for k in range(fiber.nsamples):
        C = fiber.c[k]
        S = C[np.ix_(o, o)]
        Top = C[np.ix_(o, p)]
        try:
            np.linalg.cholesky(S)
            Sinv = np.linalg.inv(S)
        except np.linalg.LinAlgError:
            raise DegenerateMaterialError(
                f"fiber sample {k} has a singular out-of-plane block"
            ) from None
        Pbar += w[k] * C[np.ix_(p, p)]
        H += w[k] * Sinv
        G += w[k] * (Sinv @ Top)
        W += w[k] * (Top.T @ Sinv @ Top)
    Hinv = np.linalg.inv(H)
    red = np.zeros((6, 6))
    red[np.ix_(p, p)] = Pbar - W + G.T @ Hinv @ G
    red[np.ix_(p, o)] = G.T @ Hinv
    red[np.ix_(o, p)] = Hinv @ G
    red[np.ix_(o, o)] = Hinv
    return QuadForm3(0.5 * (red + red.T), label="fiber-reduced")


def laminate_reduced_form(lambda1: float, lambda2, mu: float, weights=None) -> QuadForm3:
    """Closed-form fiber reduction of ``lambda1*lambda2(y3)*iso(mu, 0)``.

    For a zero-Poisson isotropic law the blocks decouple: the in-plane
    slots scale with the arithmetic mean of ``lambda2`` and the
    out-of-plane slots with its harmonic mean.  Used only as an oracle
    for ``fiber_reduce``.
    """
    lam2 = np.asarray(lambda2, dtype=float)
    if np.any(lam2 <= 0.0) or lambda1 <= 0.0 or mu <= 0.0:
        raise ValueError("laminate factors must be positive")
    if weights is None:
        weights = np.full(lam2.size, 1.0 / lam2.size)
    arith = float(weights @ lam2)
    harm = 1.0 / float(weights @ (1.0 / lam2))
    d = np.array([arith, arith, harm, harm, harm, arith])
    return QuadForm3(2.0 * mu * lambda1 * np.diag(d), label="laminate-closed-form")


@dataclass(frozen=True, eq=False)
class SlabMaterial:
    """Material over ``(y1, y2, x3)`` cells, each holding a fiber in ``y3``.

    Cells reference shared fibers through ``fiber_index`` (broadcasting:
    one fiber can serve many cells) and may carry a positive scalar
    ``scale`` per cell, which multiplies the whole fiber.  That covers
    separable laws ``lambda1(y', x3) * lambda2(y3) * Q_base`` without
    duplicating fiber data.
    """

    fibers: np.ndarray        # (nfib, nf, 6, 6)
    fiber_index: np.ndarray   # (n1, n2, n3) int
    bounds: MaterialBounds
    weights: np.ndarray | None = None   # (nf,) fiber layer fractions
    scale: np.ndarray | None = None     # (n1, n2, n3) positive per-cell factor

    def __post_init__(self):
        fibers = np.ascontiguousarray(self.fibers, dtype=float)
        if fibers.ndim != 4 or fibers.shape[2:] != (6, 6):
            raise ValueError(f"fibers must be (nfib, nf, 6, 6), got {fibers.shape}")
        idx = np.asarray(self.fiber_index, dtype=np.int64)
        if idx.ndim != 3:
            raise ValueError("fiber_index must be a 3D cell grid")
        if idx.min() < 0 or idx.max() >= fibers.shape[0]:
            raise ValueError("fiber_index out of range")
        if self.weights is None:
            w = np.full(fibers.shape[1], 1.0 / fibers.shape[1])
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (fibers.shape[1],):
                raise ValueError("weights must match the fiber sample count")
            if np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be positive and sum to 1")
        if self.scale is None:
            s = np.ones(idx.shape)
        else:
            s = np.asarray(self.scale, dtype=float)
            if s.shape != idx.shape:
                raise ValueError("scale grid must match the cell grid")
            if np.any(s <= 0.0):
                raise AdmissibilityError("cell scale factors must be positive")
        for name, arr in (("fibers", fibers), ("fiber_index", idx), ("weights", w), ("scale", s)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def grid_shape(self) -> tuple:
        return self.fiber_index.shape

    @property
    def fiber_samples(self) -> int:
        return self.fibers.shape[1]

    def fiber(self, fid: int) -> FiberMaterial:
        return FiberMaterial(c=self.fibers[fid], bounds=self.bounds, weights=self.weights)

    def cell_fiber_stacks(self) -> np.ndarray:
        """Per-cell fiber sample matrices, (ncells, nf, 6, 6), scale applied."""
        stacks = self.fibers[self.fiber_index.reshape(-1)]
        return stacks * self.scale.reshape(-1, 1, 1, 1)

    def check(self, rtol: float = 1e-9) -> None:
        """Every scaled cell sample must respect the declared bounds."""
        eig = np.linalg.eigvalsh(self.fibers)          # (nfib, nf, 6)
        fiber_lo = eig[:, :, 0].min(axis=1)            # per-fiber extremes
        fiber_hi = eig[:, :, -1].max(axis=1)
        s = self.scale.reshape(-1)
        idx = self.fiber_index.reshape(-1)
        lo = float((s * fiber_lo[idx]).min())
        hi = float((s * fiber_hi[idx]).max())
        tol = rtol * max(self.bounds.eta2, 1.0)
        if lo < self.bounds.eta1 - tol:
            raise AdmissibilityError(
                f"slab sample eigenvalue {lo:.6g} below eta1={self.bounds.eta1:.6g}"
            )
        if hi > self.bounds.eta2 + tol:
            raise AdmissibilityError(
                f"slab sample eigenvalue {hi:.6g} above eta2={self.bounds.eta2:.6g}"
            )

    def reduced_cells(self) -> np.ndarray:
        """Fiber-reduce each distinct fiber, broadcast and scale per cell."""
        reduced = np.stack(
            [fiber_reduce(self.fiber(fid)).matrix for fid in range(self.fibers.shape[0])]
        )
        out = reduced[self.fiber_index.reshape(-1)]
        return out * self.scale.reshape(-1, 1, 1)

    def refine_inplane(self, factor: int = 2) -> "SlabMaterial":
        """Nested subdivision of all three slab axes (fibers untouched)."""
        idx = self.fiber_index
        s = self.scale
        for axis in range(3):
            idx = np.repeat(idx, factor, axis=axis)
            s = np.repeat(s, factor, axis=axis)
        return SlabMaterial(
            fibers=self.fibers, fiber_index=idx, bounds=self.bounds,
            weights=self.weights, scale=s,
        )

    @classmethod
    def separable(cls, lambda1, lambda2, mu: float, grid=None,
                  bounds: MaterialBounds | None = None) -> "SlabMaterial":
        """Law ``lambda1(y', x3) * lambda2(y3) * iso(mu, 0)``.

        ``lambda1`` is a scalar or an (n1, n2, n3) array; ``lambda2``
        holds the fiber samples.
        """
        lam2 = np.asarray(lambda2, dtype=float)
        if lam2.ndim != 1 or np.any(lam2 <= 0.0):
            raise ValueError("lambda2 must be a positive 1D sample vector")
        lam1 = np.asarray(lambda1, dtype=float)
        if lam1.ndim == 0:
            if grid is None:
                grid = (1, 1, 1)
            lam1 = np.full(grid, float(lam1))
        if lam1.ndim != 3 or np.any(lam1 <= 0.0):
            raise ValueError("lambda1 must be positive, scalar or a 3D cell grid")
        base = qf_isotropic(mu, 0.0).matrix
        fibers = (lam2[:, None, None] * base)[None, :, :, :]
        if bounds is None:
            lo = 2.0 * mu * float(lam2.min()) * float(lam1.min())
            hi = 2.0 * mu * float(lam2.max()) * float(lam1.max())
            bounds = MaterialBounds(lo, hi)
        return cls(
            fibers=fibers,
            fiber_index=np.zeros(lam1.shape, dtype=np.int64),
            bounds=bounds,
            scale=lam1,
        )

    @classmethod
    def homogeneous(cls, q3: QuadForm3, grid=(1, 1, 1), nf: int = 1,
                    bounds: MaterialBounds | None = None) -> "SlabMaterial":
        if bounds is None:
            eig = q3.eigenvalues()
            bounds = MaterialBounds(float(eig[0]), float(eig[-1]))
        fibers = np.broadcast_to(q3.matrix, (1, nf, 6, 6)).copy()
        return cls(fibers=fibers, fiber_index=np.zeros(grid, dtype=np.int64), bounds=bounds)


@dataclass(frozen=True, eq=False)
class SlabCorrector:
    """Nodal corrector on the slab grid: periodic in-plane, free in x3."""

    values: np.ndarray        # (n1, n2, n3+1, 3)
    iterations: int
    residuals: tuple = field(repr=False, default=())

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def _load_vector(load):
    """Normalize a load spec ('A'|'B', basis index or Mandel 3-vector)."""
    kind, payload = load
    if kind not in ("A", "B"):
        raise ValueError(f"load kind must be 'A' or 'B', got {kind!r}")
    if np.isscalar(payload):
        a = np.zeros(3)
        a[int(payload)] = 1.0
    else:
        a = np.asarray(payload, dtype=float)
        if a.shape != (3,):
            raise ValueError("load payload must be a basis index or Mandel 3-vector")
    return kind, a


def _load_strain_field(grid, kind, a2):
    g = EMBED_2_TO_3 @ a2
    if kind == "B":
        return np.broadcast_to(g, (grid.ncells, 8, 6))
    return grid.x3q[:, :, None] * g[None, None, :]


def _slab_operator(slab: SlabMaterial, backend=None):
    grid = build_slab_grid(*slab.grid_shape)
    return grid, ElementOperator(grid, slab.reduced_cells(), backend=backend)


def slab_corrector_solve(slab: SlabMaterial, load, tol: float = DEFAULT_TOL, backend=None):
    """Minimize the slab energy under a mid-plane ('B') or curvature ('A') load.

    The load strain is ``iota(E)`` for kind 'B' and ``x3 * iota(E)`` for
    kind 'A', with ``E`` a symmetric 2x2 pattern given in Mandel
    coordinates.  Returns ``(SlabCorrector, energy)``.
    """
    slab.check()
    kind, a2 = _load_vector(load)
    grid, op = _slab_operator(slab, backend)
    gload = _load_strain_field(grid, kind, a2)
    b = -op.rhs(gload)
    x, iters, hist = conjugate_gradient(op, b, tol, noise_floor=op.rhs_noise_floor(gload))
    x = subtract_nodal_mean(x, grid.nnodes)
    energy = op.energy(x, gload)
    corr = SlabCorrector(
        values=x.reshape(*grid.node_shape, 3), iterations=iters, residuals=hist
    )
    return corr, energy


def bending_form_regime2(slab: SlabMaterial, tol: float = DEFAULT_TOL, backend=None) -> EffectiveReport:
    """Effective bending form for comparable-scale oscillation.

    Six slab solves (three curvature loads, three mid-plane loads) give
    the 6x6 energy matrix of the load pair; eliminating the mid-plane
    block leaves the 3x3 bending form and the optimal mid-plane map.
    """
    t0 = time.perf_counter()
    slab.check()
    grid, op = _slab_operator(slab, backend)
    loads = [("A", i) for i in range(3)] + [("B", i) for i in range(3)]
    fields = []
    solves = []
    for kind, i in loads:
        _, a2 = _load_vector((kind, i))
        gload = _load_strain_field(grid, kind, a2)
        b = -op.rhs(gload)
        x, iters, hist = conjugate_gradient(op, b, tol, noise_floor=op.rhs_noise_floor(gload))
        x = subtract_nodal_mean(x, grid.nnodes)
        fields.append((x, gload))
        solves.append({"load": f"{kind}{i}", "iterations": iters,
                       "residual": hist[-1] if hist else 0.0})
    N = np.empty((6, 6))
    for i in range(6):
        xi, gi = fields[i]
        for j in range(i, 6):
            xj, gj = fields[j]
            N[i, j] = N[j, i] = op.energy_bilinear(xi, gi, xj, gj)
    Naa = N[:3, :3]
    Nab = N[:3, 3:]
    Nbb = N[3:, 3:]
    try:
        np.linalg.cholesky(Nbb)
    except np.linalg.LinAlgError:
        raise AdmissibilityError(
            "mid-plane energy block is not positive definite; "
            "this cannot happen for admissible materials"
        ) from None
    X = np.linalg.solve(Nbb, Nab.T)   # Nbb^-1 Nba
    q0p = Naa - Nab @ X
    bstar = -X
    diagnostics = {
        "grid": list(slab.grid_shape),
        "fiber_samples": int(slab.fiber_samples),
        "tol": tol,
        "backend": op.backend,
        "quadrature": "gauss-2x2x2",
        "solves": solves,
        "pair_energy_matrix": N.tolist(),
        "runtime_s": time.perf_counter() - t0,
    }
    return EffectiveReport(
        form=QuadForm2(0.5 * (q0p + q0p.T), label="bending-regime2"),
        optimal_b=bstar,
        regime="regime2",
        diagnostics=diagnostics,
    )
