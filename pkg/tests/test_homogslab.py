import numpy as np
import pytest

from plate_homog import (
    AdmissibilityError,
    DegenerateMaterialError,
    FiberMaterial,
    MaterialBounds,
    SlabMaterial,
    bending_form_regime1,
    bending_form_regime2,
    fiber_reduce,
    laminate_reduced_form,
    qf_isotropic,
    slab_corrector_solve,
)
from plate_homog.core import IN_PLANE, OUT_OF_PLANE, embed2to3

from helpers import random_fiber, random_slab, random_spd

from test_homog3d import laminate_cell


class TestFiberReduce:
    def test_constant_fiber_unchanged(self):
        rng = np.random.default_rng(30)
        m = random_spd(rng, 6, 1.0, 4.0)
        fiber = FiberMaterial(
            c=np.stack([m, m, m]), bounds=MaterialBounds(0.99, 4.01)
        )
        red = fiber_reduce(fiber)
        assert np.allclose(red.matrix, m, rtol=1e-12)

    def test_two_phase_means(self):
        lam2 = np.array([1.0, 3.0])
        base = qf_isotropic(1.0, 0.0).matrix
        fiber = FiberMaterial(
            c=lam2[:, None, None] * base, bounds=MaterialBounds(2.0, 6.0)
        )
        red = fiber_reduce(fiber)
        p, o = list(IN_PLANE), list(OUT_OF_PLANE)
        assert np.allclose(red.matrix[np.ix_(p, p)], 2.0 * base[np.ix_(p, p)], rtol=1e-13)
        assert np.allclose(red.matrix[np.ix_(o, o)], 1.5 * base[np.ix_(o, o)], rtol=1e-13)

    def test_matches_closed_form_for_random_laminates(self):
        rng = np.random.default_rng(31)
        for _ in range(15):
            nf = int(rng.integers(2, 7))
            lam2 = rng.uniform(0.3, 4.0, nf)
            mu = rng.uniform(0.5, 2.0)
            lam1 = rng.uniform(0.5, 2.0)
            base = qf_isotropic(mu, 0.0).matrix
            fiber = FiberMaterial(
                c=lam1 * lam2[:, None, None] * base,
                bounds=MaterialBounds(
                    2 * mu * lam1 * lam2.min() * 0.999, 2 * mu * lam1 * lam2.max() * 1.001
                ),
            )
            red = fiber_reduce(fiber)
            expected = laminate_reduced_form(lam1, lam2, mu)
            assert np.allclose(red.matrix, expected.matrix, rtol=1e-10)

    def test_weighted_layers(self):
        lam2 = np.array([1.0, 3.0])
        w = np.array([0.25, 0.75])
        base = qf_isotropic(1.0, 0.0).matrix
        fiber = FiberMaterial(
            c=lam2[:, None, None] * base, bounds=MaterialBounds(2.0, 6.0), weights=w
        )
        red = fiber_reduce(fiber)
        arith = w @ lam2
        harm = 1.0 / (w @ (1.0 / lam2))
        expected = laminate_reduced_form(1.0, lam2, 1.0, weights=w)
        assert np.allclose(red.matrix, expected.matrix, rtol=1e-12)
        assert red.matrix[0, 0] == pytest.approx(2 * arith, rel=1e-12)
        assert red.matrix[2, 2] == pytest.approx(2 * harm, rel=1e-12)

    def test_dominated_by_plain_average(self):
        rng = np.random.default_rng(32)
        for _ in range(10):
            fiber = random_fiber(rng, nf=3)
            red = fiber_reduce(fiber)
            avg = fiber.c.mean(axis=0)
            assert np.linalg.eigvalsh(avg - red.matrix).min() >= -1e-10

    def test_preserves_admissibility(self):
        rng = np.random.default_rng(33)
        for _ in range(10):
            fiber = random_fiber(rng, nf=4, eta1=1.0, eta2=4.0)
            ev = np.linalg.eigvalsh(fiber_reduce(fiber).matrix)
            assert ev[0] > 0.0
            assert ev[-1] <= 4.0 + 1e-8

    def test_singular_transverse_block_rejected(self):
        m = np.zeros((6, 6))
        m[np.ix_(list(IN_PLANE), list(IN_PLANE))] = np.eye(3)
        fiber = FiberMaterial(
            c=np.stack([m, np.eye(6)]), bounds=MaterialBounds(1e-6, 2.0)
        )
        with pytest.raises(DegenerateMaterialError):
            fiber_reduce(fiber)

    def test_closed_form_validates_input(self):
        with pytest.raises(ValueError):
            laminate_reduced_form(1.0, [1.0, -2.0], 1.0)
        with pytest.raises(ValueError):
            laminate_reduced_form(0.0, [1.0], 1.0)

    def test_closed_form_identity_at_unit_factors(self):
        red = laminate_reduced_form(1.0, np.ones(4), 1.3)
        assert np.allclose(red.matrix, qf_isotropic(1.3, 0.0).matrix, rtol=1e-14)


class TestSlabSolve:
    def test_homogeneous_midplane_load_trivial(self):
        slab = SlabMaterial.homogeneous(qf_isotropic(1.0, 0.0), grid=(2, 2, 2), nf=2)
        corr, energy = slab_corrector_solve(slab, ("B", 0), tol=1e-12)
        assert np.allclose(corr.values, 0.0, atol=1e-14)
        assert energy == pytest.approx(2.0, rel=1e-14)  # Q(iota(e1)) = 2mu

    def test_homogeneous_curvature_load_twelfth(self):
        slab = SlabMaterial.homogeneous(qf_isotropic(1.0, 0.0), grid=(2, 2, 4), nf=2)
        corr, energy = slab_corrector_solve(slab, ("A", 0), tol=1e-12)
        assert np.allclose(corr.values, 0.0, atol=1e-13)
        assert energy == pytest.approx(2.0 / 12.0, rel=1e-13)

    def test_checkerboard_slab_between_bounds(self):
        scale = np.ones((4, 4, 2))
        i, j, _ = np.meshgrid(np.arange(4), np.arange(4), np.arange(2), indexing="ij")
        scale[((i // 2 + j // 2) % 2) == 1] = 3.0
        slab = SlabMaterial.separable(scale, np.ones(2), mu=1.0)
        reduced = slab.reduced_cells()
        voigt = reduced.mean(axis=0)
        reuss = np.linalg.inv(np.linalg.inv(reduced).mean(axis=0))
        a = np.array([1.0, 0.0, 0.0])
        g = embed2to3(a)
        _, energy = slab_corrector_solve(slab, ("B", 0), tol=1e-12)
        assert float(g @ reuss @ g) - 1e-9 <= energy <= float(g @ voigt @ g) + 1e-9

    def test_load_vector_validation(self):
        slab = SlabMaterial.homogeneous(qf_isotropic(1.0, 0.0), grid=(1, 1, 1), nf=2)
        with pytest.raises(ValueError):
            slab_corrector_solve(slab, ("C", 0), tol=1e-10)


class TestBendingRegime2:
    def test_homogeneous_isotropic_sixth(self):
        mu = 0.8
        slab = SlabMaterial.homogeneous(qf_isotropic(mu, 0.0), grid=(2, 2, 2), nf=2)
        rep = bending_form_regime2(slab, tol=1e-12)
        assert np.allclose(rep.form.matrix, (mu / 6.0) * np.eye(3), rtol=1e-12)
        assert np.allclose(rep.optimal_b, 0.0, atol=1e-12)
        assert rep.regime == "regime2"

    def test_separable_laminate_value(self):
        lam2 = np.array([1.0, 3.0])
        slab = SlabMaterial.separable(1.0, lam2, mu=1.0, grid=(2, 2, 2))
        rep = bending_form_regime2(slab, tol=1e-12)
        assert np.allclose(rep.form.matrix, (2.0 * 2.0 / 12.0) * np.eye(3), rtol=1e-12)

    def test_regime_consistency_for_fiber_materials(self):
        for lam2 in ([1.0, 3.0], [0.5, 1.0, 2.0], [1.0, 1.4, 0.7, 2.2]):
            lam2 = np.array(lam2)
            mu = 0.9
            cell = laminate_cell(tuple(mu * 2 * lam2 / (2 * mu)), mu=mu)
            r1 = bending_form_regime1(cell, tol=1e-12)
            slab = SlabMaterial.separable(1.0, lam2, mu=mu, grid=(1, 1, 2))
            r2 = bending_form_regime2(slab, tol=1e-12)
            assert np.allclose(r1.form.matrix, r2.form.matrix, rtol=1e-9)

    def test_positive_definite_symmetric_bounded(self):
        rng = np.random.default_rng(34)
        for _ in range(5):
            slab = random_slab(rng, grid=(2, 2, 2), nf=2, eta1=1.0, eta2=4.0)
            rep = bending_form_regime2(slab, tol=1e-11)
            ev = np.linalg.eigvalsh(rep.form.matrix)
            assert ev[0] > 0.0
            assert ev[-1] <= 4.0 / 12 + 1e-9
            assert np.abs(rep.form.matrix - rep.form.matrix.T).max() <= 1e-12

    def test_scaling(self):
        rng = np.random.default_rng(35)
        slab = random_slab(rng, grid=(2, 2, 2), nf=2)
        scaled = SlabMaterial(
            fibers=2.5 * slab.fibers,
            fiber_index=slab.fiber_index,
            bounds=MaterialBounds(2.5 * slab.bounds.eta1, 2.5 * slab.bounds.eta2),
            weights=slab.weights,
            scale=slab.scale,
        )
        r1 = bending_form_regime2(slab, tol=1e-12)
        r2 = bending_form_regime2(scaled, tol=1e-12)
        assert np.allclose(r2.form.matrix, 2.5 * r1.form.matrix, rtol=1e-10)

    def test_inplane_refinement_monotone(self):
        rng = np.random.default_rng(36)
        slab = random_slab(rng, grid=(2, 2, 2), nf=2)
        r1 = bending_form_regime2(slab, tol=1e-12)
        r2 = bending_form_regime2(slab.refine_inplane(2), tol=1e-12)
        a = np.array([1.0, -0.4, 0.6])
        # joint minimization over a nested space never increases values
        assert r2.form.eval_mandel(a) <= r1.form.eval_mandel(a) + 1e-9

    def test_diagnostics(self):
        slab = SlabMaterial.separable(1.0, np.array([1.0, 2.0]), mu=1.0, grid=(2, 2, 2))
        rep = bending_form_regime2(slab, tol=1e-11)
        d = rep.diagnostics
        assert d["grid"] == [2, 2, 2]
        assert d["fiber_samples"] == 2
        assert len(d["solves"]) == 6
        assert all(s["residual"] <= 1e-11 for s in d["solves"])


class TestSlabMaterialValidation:
    def test_bounds_checked(self):
        fibers = np.broadcast_to(np.eye(6), (1, 2, 6, 6)).copy()
        slab = SlabMaterial(
            fibers=fibers,
            fiber_index=np.zeros((1, 1, 1), dtype=np.int64),
            bounds=MaterialBounds(2.0, 3.0),
        )
        with pytest.raises(AdmissibilityError):
            slab.check()

    def test_scale_must_be_positive(self):
        fibers = np.broadcast_to(np.eye(6), (1, 2, 6, 6)).copy()
        with pytest.raises(AdmissibilityError):
            SlabMaterial(
                fibers=fibers,
                fiber_index=np.zeros((1, 1, 1), dtype=np.int64),
                bounds=MaterialBounds(0.5, 2.0),
                scale=np.zeros((1, 1, 1)),
            )

    def test_fiber_index_range_checked(self):
        fibers = np.broadcast_to(np.eye(6), (1, 2, 6, 6)).copy()
        with pytest.raises(ValueError):
            SlabMaterial(
                fibers=fibers,
                fiber_index=np.full((1, 1, 1), 3, dtype=np.int64),
                bounds=MaterialBounds(0.5, 2.0),
            )

    def test_separable_bounds_derived(self):
        slab = SlabMaterial.separable(
            np.full((1, 1, 2), 2.0), np.array([1.0, 3.0]), mu=0.5
        )
        assert slab.bounds.eta1 == pytest.approx(2.0)
        assert slab.bounds.eta2 == pytest.approx(6.0)
        slab.check()
