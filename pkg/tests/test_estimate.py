from __future__ import annotations

import numpy as np
import pytest

from so3fda import curves as cv
from so3fda import estimate as est
from so3fda import gpsim
from so3fda import liegroup as lg


def const(R, t):
    return cv.RotCurve.constant(R, t)


def rich_curve(t, a=np.pi / 4):
    """Lift with second-moment matrix I/4 (four orthogonal directions equally)."""
    q = np.column_stack(
        [
            np.cos(a) * np.cos(2 * np.pi * t),
            np.cos(a) * np.sin(2 * np.pi * t),
            np.sin(a) * np.cos(4 * np.pi * t),
            np.sin(a) * np.sin(4 * np.pi * t),
        ]
    )
    return cv.RotCurve(t, lg.quat_to_rot(q))


@pytest.fixture
def sample(rng, grid):
    return gpsim.sample_gp(gpsim.make_model("B1", grid), rng, 8)


class TestPem:
    def test_single_curve(self, rng, grid):
        c = gpsim.sample_gp(gpsim.make_model("A0", grid), rng)
        res = est.pem([c])
        assert np.allclose(res.curve.R, c.R, atol=1e-14) and res.unique.all()

    def test_symmetric_pair(self, rng, grid):
        R1, R2 = lg.exp_so3([0.3, 0, 0]), lg.exp_so3([-0.3, 0, 0])
        res = est.pem([const(R1, grid), const(R2, grid)])
        assert np.allclose(res.curve.R, np.eye(3), atol=1e-15)
        # brute force: identity maximizes trace(mean^T R)
        M = (R1 + R2) / 2
        cands = lg.random_rotation(rng, 10**5)
        assert np.trace(M) >= np.max(np.einsum("ij,nij->n", M, cands))

    def test_rank_one_mean_raises(self, grid):
        with pytest.raises(est.PemError) as info:
            est.pem([const(np.eye(3), grid), const(np.diag([1.0, -1, -1]), grid)])
        assert info.value.points == list(range(grid.size))

    def test_reports_min_second_singular(self, sample):
        res = est.pem(sample)
        X = cv.stack(sample).mean(axis=0)
        assert res.min_second_singular == pytest.approx(np.linalg.svd(X, compute_uv=False)[:, 1].min())

    @pytest.mark.invariant
    def test_isometry_equivariance(self, rng, sample):
        P, Q = lg.random_rotation(rng, 2)
        moved = [cv.act_isometry(P, Q, c) for c in sample]
        lhs = est.pem(moved).curve.R
        rhs = P @ est.pem(sample).curve.R @ Q
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    @pytest.mark.invariant
    def test_warp_equivariance(self, sample, grid):
        w = cv.Warp.from_function(lambda s: s + 0.05 * np.sin(2 * np.pi * s), grid)
        lhs = est.pem([cv.warp_curve(c, w) for c in sample]).curve
        rhs = cv.warp_curve(est.pem(sample).curve, w)
        steps = lg.geo_dist(rhs.R[:-1], rhs.R[1:])
        assert np.max(lg.geo_dist(lhs.R, rhs.R)) < np.max(steps) ** 2


class TestLosses:
    @pytest.mark.parametrize("variant", est.INTRINSIC_LOSSES)
    def test_self_is_zero(self, sample, variant):
        assert est.loss_intrinsic(sample[0], sample[0], variant) < 1e-10

    def test_translates_with_zero_loss(self, rng, sample):
        P = lg.random_rotation(rng)
        c, eye = sample[0], np.eye(3)
        # c (P c)^-1 is constant, as is c^-1 (c P)
        assert est.loss_intrinsic(c, cv.act_isometry(P, eye, c), "I1") < 1e-10
        assert est.loss_intrinsic(c, cv.act_isometry(eye, P, c), "I2") < 1e-10
        assert est.loss_intrinsic(c, cv.act_isometry(eye, P, c), "I1") > 1e-3

    def test_left_invariance_i1(self, rng, sample):
        P = lg.random_rotation(rng)
        a, b = sample[0], sample[1]
        lhs = est.loss_intrinsic(cv.act_isometry(P, np.eye(3), a), b, "I1")
        assert lhs == pytest.approx(est.loss_intrinsic(a, b, "I1"), abs=1e-10)

    @pytest.mark.invariant
    @pytest.mark.parametrize("variant", est.INTRINSIC_LOSSES)
    def test_symmetry(self, sample, variant):
        a, b = sample[0], sample[1]
        assert abs(est.loss_intrinsic(a, b, variant) - est.loss_intrinsic(b, a, variant)) < 1e-10

    @pytest.mark.invariant
    @pytest.mark.parametrize("variant", est.INTRINSIC_LOSSES)
    def test_group_invariance(self, rng, grid, variant):
        model = gpsim.make_model("B2", grid)
        a, b = gpsim.sample_gp(model, rng, 2)
        P, Q = lg.random_rotation(rng, 2)
        w = cv.Warp.from_function(lambda s: s + 0.05 * np.sin(2 * np.pi * s), grid)
        act = lambda c: cv.warp_curve(cv.act_isometry(P, Q, c), w)
        base = est.loss_intrinsic(a, b, variant)
        steps = lg.geo_dist(a.R[:-1], a.R[1:])
        tol = 5 * (grid.size - 1) * np.max(steps) ** 2
        assert abs(est.loss_intrinsic(act(a), act(b), variant) - base) < tol

    def test_unknown_variant(self, sample):
        with pytest.raises(ValueError):
            est.loss_intrinsic(sample[0], sample[1], "L2quat")

    def test_l2quat_self_zero(self, sample):
        assert est.loss_l2quat(sample[0], sample[0]) == 0.0

    def test_l2quat_half_turn(self, grid):
        val = est.loss_l2quat(const(np.eye(3), grid), const(lg.exp_so3([np.pi, 0, 0]), grid))
        assert val == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.invariant
    def test_l2quat_sign_invariance(self, sample, grid):
        qa, qb = cv.lift_array(sample[0].R), cv.lift_array(sample[1].R)
        ref = est.l2quat_arr(grid, qa, qb)
        assert est.l2quat_arr(grid, -qa, qb) == ref
        assert est.l2quat_arr(grid, qa, -qb) == ref

    def test_trapezoid_weights(self, grid):
        assert est.trapezoid_weights(grid).sum() == pytest.approx(1.0, abs=1e-15)


class TestHMatrix:
    def test_constant_identity(self, grid):
        q = cv.lift(const(np.eye(3), grid))
        assert np.allclose(est.h_matrix(q, q), np.diag([1.0, 0, 0, 0]), atol=1e-15)

    def test_linearity(self, rng, sample):
        a = cv.lift(sample[0])
        R = lg.random_so4(rng)
        b = cv.QuatCurve(a.t, a.q @ R.T)
        assert np.allclose(est.h_matrix(a, b), R @ est.h_matrix(a, a), atol=1e-13)

    def test_full_rank_under_null(self, rng, grid):
        a = rich_curve(grid)
        P, Q = gpsim.misalignment()
        H = est.h_matrix(cv.lift(a), cv.lift(cv.act_isometry(P, Q, a)))
        d = np.linalg.svd(H, compute_uv=False)
        assert d[3] / d[0] > 0.9


class TestSpatialAlign:
    def test_identical_rich_curves(self, grid):
        c = rich_curve(grid)
        res = est.spatial_align(c, c)
        assert np.allclose(res.P, np.eye(3), atol=1e-8) and np.allclose(res.Q, np.eye(3), atol=1e-8)
        assert res.unique

    def test_recovers_misalignment(self, grid):
        a = gpsim.center_curve(2.0, grid)
        P, Q = gpsim.misalignment()
        res = est.spatial_align(a, cv.act_isometry(P, Q, a))
        assert lg.geo_dist(res.P, P) < 1e-7 and lg.geo_dist(res.Q, Q) < 1e-7

    def test_constant_curve_not_unique(self, rng, grid):
        c = const(lg.random_rotation(rng), grid)
        assert not est.spatial_align(c, c).unique

    @pytest.mark.invariant
    def test_inverse_alignment(self, rng, grid):
        a, b = gpsim.sample_gp(gpsim.make_model("B2", grid), rng, 2)
        res = est.spatial_align(a, b)
        assert res.unique
        res2 = est.spatial_align(cv.act_isometry(res.P, res.Q, a), b)
        assert lg.geo_dist(res2.P, np.eye(3)) < 1e-7 and lg.geo_dist(res2.Q, np.eye(3)) < 1e-7

    @pytest.mark.invariant
    def test_beats_random_candidates(self, rng, grid):
        for _ in range(20):
            a = gpsim.sample_gp(gpsim.make_model("B2", grid), rng)
            b = cv.act_isometry(*lg.random_rotation(rng, 2), gpsim.sample_gp(gpsim.make_model("A0", grid), rng))
            res = est.spatial_align(a, b)
            best = est.loss_l2quat(cv.act_isometry(res.P, res.Q, a), b)
            qa, qb = cv.lift_array(a.R), cv.lift_array(b.R)
            Ps, Qs = lg.random_rotation(rng, 10**4), lg.random_rotation(rng, 10**4)
            R4 = np.stack([lg.quat_pair_to_so4(p, q) for p, q in zip(lg.rot_to_quat(Ps), lg.rot_to_quat(Qs))])
            moved = np.einsum("nij,kj->nki", R4, qa)  # lift of P a Q up to a global sign
            w = est.trapezoid_weights(grid)
            minus = np.einsum("k,nk->n", w, np.sum((moved - qb) ** 2, axis=-1))
            plus = np.einsum("k,nk->n", w, np.sum((moved + qb) ** 2, axis=-1))
            assert best <= np.min(np.minimum(minus, plus)) + 1e-12


class TestTemporalAlign:
    def test_equal_curves_identity(self, sample):
        w = est.temporal_align(sample[0], sample[0])
        assert np.array_equal(w.image, sample[0].t)

    def test_constant_curves_identity(self, grid):
        c = const(np.eye(3), grid)
        assert np.array_equal(est.temporal_align(c, c).image, grid)

    def test_recovers_known_warp(self, grid):
        a = gpsim.center_curve(2.0, grid)
        w = cv.Warp.from_function(lambda s: s + 0.1 * np.sin(2 * np.pi * s), grid)
        # dense oracle of the inverse warp
        dense = np.linspace(0, 1, 20001)
        inv = np.interp(grid, dense + 0.1 * np.sin(2 * np.pi * dense), dense)
        phi = est.temporal_align(a, cv.warp_curve(a, w))
        assert np.max(np.abs(phi.image - inv)) <= 3 * 0.01

    @pytest.mark.invariant
    @pytest.mark.parametrize("variant", est.INTRINSIC_LOSSES)
    def test_never_increases_loss(self, rng, grid, variant):
        a = gpsim.sample_gp(gpsim.make_model("B2", grid), rng)
        b = gpsim.sample_gp(gpsim.make_model("A0", grid), rng)
        phi = est.temporal_align(a, b, variant)
        assert est.loss_intrinsic(a, cv.warp_curve(b, phi), variant) <= est.loss_intrinsic(a, b, variant) + 1e-12

    def test_path_cost_is_the_loss(self, rng, grid):
        a = gpsim.sample_gp(gpsim.make_model("B2", grid), rng)
        b = gpsim.sample_gp(gpsim.make_model("B0.5", grid), rng)
        ii, jj, cost = est.dp_backend()(grid, a.R, b.R, cv.increments(b.R), 0.5, 0.5, 3)
        phi = cv.Warp(grid, np.interp(grid, grid[ii], grid[jj]))
        assert cost == pytest.approx(est.loss_intrinsic(a, cv.warp_curve(b, phi), "Imean"), abs=1e-10)

    def test_rejects_l2quat(self, sample):
        with pytest.raises(ValueError):
            est.temporal_align(sample[0], sample[1], "L2quat")


class TestSampleAlign:
    def test_identical_samples(self, sample):
        aligned, res = est.sample_align(sample, sample)
        assert res.iterations == 1 and res.converged
        assert np.allclose(res.P, np.eye(3), atol=1e-3) and np.allclose(res.Q, np.eye(3), atol=1e-3)
        assert res.warp.sup_dist_identity() == 0.0

    def test_all_off(self, sample):
        opts = est.AlignOptions(use_spatial=False, use_temporal=False)
        aligned, res = est.sample_align(sample, sample[::-1], opts)
        assert res.iterations == 0 and res.warp is None
        assert all(np.array_equal(a.R, c.R) for a, c in zip(aligned, sample))

    def test_undoes_misalignment(self, rng, grid):
        model = gpsim.make_model("A0", grid)
        chi2 = gpsim.sample_gp(model, rng, 15)
        P, Q = gpsim.misalignment()
        chi1 = [cv.act_isometry(P, Q, c) for c in gpsim.sample_gp(model, rng, 15)]
        aligned, res = est.sample_align(chi1, chi2, est.AlignOptions(use_temporal=False))
        assert res.converged
        err = lg.geo_dist(est.pem(aligned).curve.R, est.pem(chi2).curve.R)
        assert np.max(err) < 0.05

    def test_grid_mismatch(self, sample):
        other = [const(np.eye(3), np.linspace(0, 1, 11))]
        with pytest.raises(ValueError):
            est.sample_align(sample, other)
