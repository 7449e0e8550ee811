from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from so3fda import curves as cv
from so3fda import estimate as est
from so3fda import gpsim
from so3fda import testing as pt


@pytest.fixture(scope="module")
def samples():
    t = np.linspace(0, 1, 51)
    spec = gpsim.make_model("A0", t)
    X1 = gpsim.sample_gp_array(spec, gpsim.make_rng(3, 1), 6)
    X2 = gpsim.sample_gp_array(spec, gpsim.make_rng(3, 2), 6)
    return t, X1, X2


class TestPlan:
    def test_auto_exhaustive(self):
        plan = pt.PermutationPlan(2, 2, 100)
        assert plan.exhaustive and plan.n_perm == 6

    def test_monte_carlo_when_too_many(self):
        plan = pt.PermutationPlan(10, 10, 300)
        assert not plan.exhaustive and plan.n_perm == 300

    def test_forced_exhaustive_needs_room(self):
        with pytest.raises(ValueError):
            pt.PermutationPlan(10, 10, 300, exhaustive=True)

    @pytest.mark.parametrize("kw", [dict(n1=0, n2=3), dict(n1=3, n2=3, n_perm=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            pt.PermutationPlan(**kw)


class TestStream:
    def test_identity_first(self):
        for plan in (pt.PermutationPlan(3, 4, 10), pt.PermutationPlan(10, 10, 50, seed=7)):
            assert np.array_equal(pt.perm_stream(plan, 0), np.arange(plan.n1))

    def test_two_singletons(self):
        plan = pt.PermutationPlan(1, 1, 10)
        assert plan.n_perm == 2
        assert [pt.perm_stream(plan, i).tolist() for i in range(2)] == [[0], [1]]

    def test_exhaustive_is_lexicographic(self):
        plan = pt.PermutationPlan(3, 3, 1000)
        got = [tuple(pt.perm_stream(plan, i)) for i in range(plan.n_perm)]
        assert got == list(itertools.combinations(range(6), 3))

    def test_out_of_range(self):
        plan = pt.PermutationPlan(3, 3, 10, exhaustive=False)
        with pytest.raises(IndexError):
            pt.perm_stream(plan, 10)

    def test_deterministic(self):
        plan = pt.PermutationPlan(10, 10, 100, seed=11)
        assert np.array_equal(pt.perm_stream(plan, 42), pt.perm_stream(plan, 42))
        other = pt.PermutationPlan(10, 10, 100, seed=12)
        assert not all(np.array_equal(pt.perm_stream(plan, i), pt.perm_stream(other, i)) for i in range(1, 6))

    def test_uniform_splits(self):
        n = 10**5
        plan = pt.PermutationPlan(2, 2, n + 1, seed=5, exhaustive=False)
        splits = list(itertools.combinations(range(4), 2))
        counts = np.zeros(len(splits))
        for i in range(1, n + 1):
            counts[splits.index(tuple(pt.perm_stream(plan, i)))] += 1
        assert stats.chisquare(counts).pvalue > 0.001


class TestPValue:
    def test_tie_rules(self):
        s = np.array([1.0, 1.0, 2.0, 0.5])
        assert pt.p_value(s, "conservative") == 0.75
        assert pt.p_value(s, "strict") == 0.25

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            pt.p_value(np.ones(3), "fuzzy")


class TestNoAction:
    @pytest.mark.invariant
    def test_report_fields(self, samples):
        t, X1, X2 = samples
        rep = pt.test_no_action(X1, X2, t=t, n_perm=50, seed=2)
        assert rep.statistics_perm[0] == rep.statistic_observed
        assert rep.reject == (rep.p_value < rep.alpha)
        assert rep.variant == "none" and rep.statistics_perm.size == 50
        expect = est.curve_loss_arr(t, est.pem_arr(X1), est.pem_arr(X2), "Imean")
        assert rep.statistic_observed == expect

    def test_accepts_curve_sequences(self, samples):
        t, X1, X2 = samples
        chi1 = [cv.RotCurve(t, x) for x in X1]
        chi2 = [cv.RotCurve(t, x) for x in X2]
        a = pt.test_no_action(chi1, chi2, n_perm=30, seed=2)
        b = pt.test_no_action(X1, X2, t=t, n_perm=30, seed=2)
        assert np.array_equal(a.statistics_perm, b.statistics_perm)

    @pytest.mark.invariant
    def test_deterministic_and_parallel(self, samples):
        t, X1, X2 = samples
        a = pt.test_no_action(X1, X2, t=t, n_perm=40, seed=9)
        b = pt.test_no_action(X1, X2, t=t, n_perm=40, seed=9)
        c = pt.test_no_action(X1, X2, t=t, n_perm=40, seed=9, n_jobs=2)
        assert a.to_text() == b.to_text() == c.to_text()
        assert np.array_equal(a.statistics_perm, c.statistics_perm)

    def test_exhaustive_small(self, samples):
        t, X1, X2 = samples
        rep = pt.test_no_action(X1[:3], X2[:3], t=t, n_perm=1000)
        assert rep.exhaustive and rep.statistics_perm.size == math.comb(6, 3)

    def test_pem_failure_reports_index(self):
        t = np.linspace(0, 1, 11)
        eye, flip = np.eye(3), np.diag([1.0, -1.0, -1.0])
        X1 = np.stack([np.broadcast_to(eye, (11, 3, 3))] * 2)
        X2 = np.stack([np.broadcast_to(flip, (11, 3, 3))] * 2)
        with pytest.raises(pt.PermutationError) as info:
            pt.test_no_action(X1, X2, t=t, n_perm=100)
        assert info.value.index == 1

    def test_strict_rule(self, samples):
        t, X1, X2 = samples
        rep = pt.test_no_action(X1, X2, t=t, n_perm=50, seed=2, tie_rule="strict")
        assert rep.p_value == np.mean(rep.statistics_perm > rep.statistic_observed)

    def test_text_is_stable(self, samples):
        t, X1, X2 = samples
        rep = pt.test_no_action(X1, X2, t=t, n_perm=20, seed=1)
        fields = dict(line.split("=", 1) for line in rep.to_text().strip().splitlines())
        assert fields["variant"] == "none" and fields["n_perm"] == "20"
        # floats round-trip exactly
        assert float(fields["statistic_observed"]) == rep.statistic_observed
        assert float(fields["p_value"]) == rep.p_value

    def test_bad_alpha(self, samples):
        t, X1, X2 = samples
        with pytest.raises(ValueError):
            pt.test_no_action(X1, X2, t=t, alpha=1.5)


class TestRegistered:
    def test_prereg_statistic(self, samples):
        t, X1, X2 = samples
        opts = est.AlignOptions(use_temporal=False)
        rep = pt.test_prereg(X1, X2, opts=opts, t=t, n_perm=20, seed=4)
        aligned = est.sample_align_arr(t, X1, X2, opts)[0]
        expect = est.curve_loss_arr(t, est.pem_arr(aligned), est.pem_arr(X2), "Imean")
        assert rep.statistic_observed == expect and rep.variant == "prereg"

    def test_empty_part_rule(self, samples):
        t, X1, X2 = samples
        stat = pt._ContinualStat(t, np.concatenate([X1, X2]), len(X1), "Imean", est.AlignOptions())
        assert np.array_equal(stat._omega(np.arange(len(X1))), est.pem_arr(X1))
        assert np.array_equal(stat._omega(np.arange(len(X1), 2 * len(X1))), est.pem_arr(X2))

    def test_continual_observed_matches_prereg(self, samples):
        t, X1, X2 = samples
        opts = est.AlignOptions(use_temporal=False)
        c = pt.test_continual(X1, X2, opts=opts, t=t, n_perm=5, seed=4)
        p = pt.test_prereg(X1, X2, opts=opts, t=t, n_perm=5, seed=4)
        assert c.statistic_observed == pytest.approx(p.statistic_observed, abs=1e-12)

    def test_continual_absorbs_misalignment(self, samples):
        t, X1, X2 = samples
        P, Q = gpsim.misalignment()
        opts = est.AlignOptions(use_temporal=False)
        assert pt.test_no_action(X1, P @ X2 @ Q, t=t, n_perm=50).reject
        assert not pt.test_continual(X1, P @ X2 @ Q, opts=opts, t=t, n_perm=50).reject

    def test_not_collected_by_pytest(self):
        assert pt.test_no_action.__test__ is False and pt.TestReport.__test__ is False
