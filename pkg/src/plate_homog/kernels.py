"""Hot element-operator kernels with switchable backends.

The corrector solves spend nearly all their time applying the periodic
finite-element stiffness operator inside conjugate gradients.  Two
implementations of that matvec live here:

- ``numba``: an @njit kernel looping over cells (default when numba is
  importable),
- ``numpy``: a vectorized gather/einsum/scatter fallback.

Select with the ``PLATE_HOMOG_BACKEND`` environment variable
(``numba`` or ``numpy``).  ``benchmarks/bench_backends.py`` compares the
two on the same problem.
"""

from __future__ import annotations

import os

import numpy as np

BACKEND_ENV = "PLATE_HOMOG_BACKEND"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    njit = None
    HAVE_NUMBA = False


def available_backends():
    return ("numba", "numpy") if HAVE_NUMBA else ("numpy",)


def resolve_backend(name: str | None = None) -> str:
    """Pick the backend: explicit argument, else env var, else best available."""
    choice = name or os.environ.get(BACKEND_ENV, "").strip().lower() or None
    if choice is None:
        return "numba" if HAVE_NUMBA else "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}; use 'numba' or 'numpy'")
    if choice == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    return choice


def matvec_numpy(x, idx, cellC, B, w):
    """Stiffness matvec, vectorized over cells.

    x:     (nnodes, 3) nodal values
    idx:   (ncells, 8) node gather indices
    cellC: (ncells, 6, 6) material matrices
    B:     (8, 6, 24) strain-displacement matrices at the quadrature points
    w:     (8,) quadrature weights (already include the cell volume)
    """
    ncells = idx.shape[0]
    u = x[idx].reshape(ncells, 24)
    ylocal = np.zeros((ncells, 24))
    for q in range(8):
        g = u @ B[q].T                      # (ncells, 6)
        s = np.einsum("cij,cj->ci", cellC, g)
        ylocal += (w[q] * s) @ B[q]
    y = np.zeros_like(x)
    np.add.at(y, idx, ylocal.reshape(ncells, 8, 3))
    return y


if HAVE_NUMBA:

    @njit(cache=True)
    def matvec_numba(x, idx, cellC, B, w):  # pragma: no cover - jitted
        nnodes = x.shape[0]
        ncells = idx.shape[0]
        y = np.zeros((nnodes, 3))
        u = np.empty(24)
        g = np.empty(6)
        s = np.empty(6)
        yl = np.empty(24)
        for c in range(ncells):
            for a in range(8):
                node = idx[c, a]
                u[3 * a] = x[node, 0]
                u[3 * a + 1] = x[node, 1]
                u[3 * a + 2] = x[node, 2]
            for j in range(24):
                yl[j] = 0.0
            for q in range(8):
                for i in range(6):
                    acc = 0.0
                    for j in range(24):
                        acc += B[q, i, j] * u[j]
                    g[i] = acc
                for i in range(6):
                    acc = 0.0
                    for j in range(6):
                        acc += cellC[c, i, j] * g[j]
                    s[i] = w[q] * acc
                for j in range(24):
                    acc = 0.0
                    for i in range(6):
                        acc += B[q, i, j] * s[i]
                    yl[j] += acc
            for a in range(8):
                node = idx[c, a]
                y[node, 0] += yl[3 * a]
                y[node, 1] += yl[3 * a + 1]
                y[node, 2] += yl[3 * a + 2]
        return y


_NUMBA_VERIFIED = False


def _verify_numba_once():
    """Cross-check the jitted kernel against the numpy kernel once per process.

    Guards against a stale or corrupted on-disk JIT cache producing a
    silently wrong operator: CG would then diverge or, worse, converge
    to a wrong corrector.
    """
    global _NUMBA_VERIFIED
    if _NUMBA_VERIFIED:
        return
    rng = np.random.default_rng(12345)
    x = rng.standard_normal((4, 3))
    idx = np.array([[0, 1, 2, 3, 0, 1, 2, 3], [2, 3, 0, 1, 3, 2, 1, 0]], dtype=np.int64)
    M = rng.standard_normal((2, 6, 6))
    cellC = M @ M.transpose(0, 2, 1) + 6.0 * np.eye(6)
    B = rng.standard_normal((8, 6, 24))
    w = np.full(8, 0.125)
    ref = matvec_numpy(x, idx, cellC, B, w)
    got = matvec_numba(x, idx, cellC, B, w)
    if not np.allclose(got, ref, rtol=1e-10, atol=1e-12):
        raise RuntimeError(
            "numba kernel self-check failed; clear the __pycache__ JIT cache or "
            f"set {BACKEND_ENV}=numpy"
        )
    _NUMBA_VERIFIED = True


def get_matvec(backend: str | None = None):
    """Return the matvec implementation for the chosen backend."""
    choice = resolve_backend(backend)
    if choice == "numba":
        _verify_numba_once()
        return matvec_numba
    return matvec_numpy
