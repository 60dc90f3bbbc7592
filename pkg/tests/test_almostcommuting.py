import mpmath
import pytest
from mpmath import mpf

from circlerenorm import almostcommuting as ac
from circlerenorm import circlemap as cm
from circlerenorm import pairs as pr
from circlerenorm.errors import (
    CriticalCrowding,
    MonotonicityBroken,
    PreconditionError,
)
from circlerenorm.numerics import ContinuedFraction, fit_decay


@pytest.fixture(scope="module")
def base_pair(golden_bicubic):
    return pr.pair_from_map(golden_bicubic, 2)


class TestPerturbation:
    def test_zero_perturbation_commutes(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf(0), 3)
        assert pr.commutator_norm(acp, mpf("0.05"), 32) < mpf("1e-24")

    def test_commutator_scale_tracks_eps(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 3)
        norm = pr.commutator_norm(acp, mpf("0.05"), 64)
        assert mpf("1e-7") <= norm <= mpf("1e-5")

    def test_commutation_order_exactly_k(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 3)
        assert ac.commutation_order(acp, 5) == 3
        acp4 = ac.perturb_to_almost_commuting(base_pair, mpf("1e-5"), 4)
        assert ac.commutation_order(acp4, 6) == 4

    def test_height_preserved_below_safety_margin(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 3)
        assert pr.height(acp) == pr.height(base_pair)

    def test_large_bump_breaks_monotonicity(self, base_pair):
        with pytest.raises(MonotonicityBroken):
            ac.perturb_to_almost_commuting(base_pair, mpf("0.09"), 12)

    def test_eps_precondition(self, base_pair):
        with pytest.raises(PreconditionError):
            ac.perturb_to_almost_commuting(base_pair, mpf("0.5"), 3)

    def test_order_never_decreases_under_renormalization(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 3)
        current = acp.normalized()
        for _ in range(3):
            current = pr.renormalize(current)
            assert ac.commutation_order(current, 5) >= 3

    def test_norm_monotone_in_radius(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 3)
        n1 = pr.commutator_norm(acp, mpf("0.05"), 64)
        n2 = pr.commutator_norm(acp, mpf("0.1"), 64)
        assert n1 <= n2


class TestOsculation:
    def test_distance_decreases_with_level(self, golden_bicubic):
        dists = []
        for level in (4, 6, 8):
            p = pr.pair_from_map(golden_bicubic, level)
            osc = ac.osculate_pair(p, level, 3)
            dists.append(pr.dist_c0(p, osc, 48))
        assert dists[0] > dists[1] > dists[2]

    def test_factors_match_endpoint_jets(self, golden_bicubic):
        # every diffeomorphic factor osculates the true map to order D at
        # both ends of its partition atom
        p = pr.pair_from_map(golden_bicubic, 5)
        D = 3
        chain = ac._osculate_branch(p.eta, golden_bicubic, D)
        checked = 0
        for f in chain.factors:
            if f.power != 1:
                continue
            for x in (f.lo, f.hi):
                got = f.poly.jet(x, D)
                want = cm.evaluate(golden_bicubic, x, D).derivatives
                shift = want[0] - got[0]
                assert abs(shift - mpmath.nint(shift)) < mpf("1e-24")
                for a, b in zip(got[1:], want[1:]):
                    assert abs(a - b) < mpf("1e-20")
                checked += 1
        assert checked > 4

    def test_commutation_order_at_least_three(self, golden_bicubic):
        p = pr.pair_from_map(golden_bicubic, 6)
        osc = ac.osculate_pair(p, 6, 3)
        assert ac.commutation_order(osc, 4) >= 3

    def test_height_preserved(self, golden_bicubic):
        for level in (4, 6):
            p = pr.pair_from_map(golden_bicubic, level)
            osc = ac.osculate_pair(p, level, 3)
            assert pr.height(osc) == pr.height(p)

    def test_shallow_level_crowds(self, golden_bicubic):
        p = pr.pair_from_map(golden_bicubic, 0)
        with pytest.raises(CriticalCrowding):
            ac.osculate_pair(p, 0, 3)

    def test_level_mismatch_rejected(self, golden_bicubic):
        p = pr.pair_from_map(golden_bicubic, 4)
        with pytest.raises(PreconditionError):
            ac.osculate_pair(p, 5, 3)


class TestDecaySeries:
    def test_true_pair_all_roundoff(self, base_pair):
        series = ac.commutator_decay_series(base_pair, 3, mpf("0.05"), 32)
        assert not series.truncated
        assert all(n < mpf("1e-24") for n in series.norms())

    def test_perturbed_series_decays(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 12)
        series = ac.commutator_decay_series(acp, 4, mpf("0.05"), 48)
        norms = series.norms()
        assert not series.truncated
        assert all(norms[i + 1] < norms[i] for i in range(len(norms) - 1))
        fit = fit_decay(series.points)
        assert fit.log_lambda < 0

    def test_csv_schema(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-6"), 12)
        series = ac.commutator_decay_series(acp, 2, mpf("0.05"), 16)
        lines = series.to_csv().splitlines()
        assert lines[0] == "m,norm"
        assert len(lines) == 4


class TestRotationCorrection:
    def test_offset_restores_target_digits(self, base_pair):
        acp = ac.perturb_to_almost_commuting(base_pair, mpf("1e-7"), 12)
        target = ContinuedFraction.golden(5)
        offset = ac.rotation_correction_offset(acp, target, 5)
        assert abs(offset) < mpf("0.05")
        glued = pr.glue(acp).with_offset(offset)
        got = cm.rotation_digits(glued, 5, start=glued.marked)
        assert got.digits == target.digits[:5]
