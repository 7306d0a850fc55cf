"""Shared generators for admissible random materials."""

import numpy as np

from plate_homog import (
    CellMaterial3,
    FiberMaterial,
    MaterialBounds,
    QuadForm2,
    QuadForm3,
    SlabMaterial,
    ThicknessProfile,
)


def random_spd(rng, n, lo, hi):
    """Symmetric matrix with eigenvalues drawn uniformly from [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    m = q @ np.diag(rng.uniform(lo, hi, n)) @ q.T
    return 0.5 * (m + m.T)


def random_form3(rng, eta1=1.0, eta2=4.0) -> QuadForm3:
    return QuadForm3(random_spd(rng, 6, eta1, eta2))


def random_form2(rng, eta1=1.0, eta2=4.0) -> QuadForm2:
    return QuadForm2(random_spd(rng, 3, eta1, eta2))


def random_cell(rng, grid=(2, 2, 2), eta1=1.0, eta2=4.0) -> CellMaterial3:
    n = int(np.prod(grid))
    c = np.stack([random_spd(rng, 6, eta1, eta2) for _ in range(n)]).reshape(*grid, 6, 6)
    margin = 1e-9 * max(1.0, eta2)
    return CellMaterial3(c=c, bounds=MaterialBounds(eta1 - margin, eta2 + margin))


def random_fiber(rng, nf=2, eta1=1.0, eta2=4.0) -> FiberMaterial:
    c = np.stack([random_spd(rng, 6, eta1, eta2) for _ in range(nf)])
    margin = 1e-9 * max(1.0, eta2)
    return FiberMaterial(c=c, bounds=MaterialBounds(eta1 - margin, eta2 + margin))


def random_slab(rng, grid=(2, 2, 2), nf=2, nfib=3, eta1=1.0, eta2=4.0) -> SlabMaterial:
    fibers = np.stack(
        [np.stack([random_spd(rng, 6, eta1, eta2) for _ in range(nf)]) for _ in range(nfib)]
    )
    idx = rng.integers(0, nfib, size=grid)
    margin = 1e-9 * max(1.0, eta2)
    return SlabMaterial(
        fibers=fibers, fiber_index=idx, bounds=MaterialBounds(eta1 - margin, eta2 + margin)
    )


def random_profile2(rng, eta1=2.0, eta2=5.0) -> ThicknessProfile:
    """Random 2D profile with samples inside [eta1, eta2], random rule."""
    rule = rng.choice(["layers", "midpoint", "gauss"])
    n = int(rng.integers(2, 6)) if rule == "gauss" else int(rng.integers(1, 6))
    forms = tuple(QuadForm2(random_spd(rng, 3, eta1, eta2)) for _ in range(n))
    if rule == "layers":
        cuts = np.sort(rng.uniform(-0.5, 0.5, n - 1)) if n > 1 else np.empty(0)
        breaks = np.concatenate(([-0.5], cuts, [0.5]))
        if np.any(np.diff(breaks) <= 1e-6):
            return random_profile2(rng, eta1, eta2)
        return ThicknessProfile(forms, rule="layers", breaks=breaks)
    return ThicknessProfile(forms, rule=str(rule))
