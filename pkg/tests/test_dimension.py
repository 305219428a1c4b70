import math

import numpy as np
import pytest

from fractube import dimension as dim
from fractube import hierarchy as hi
from fractube.params import claim_demo_schedule, default_schedule


@pytest.fixture(scope="module")
def toy_levels():
    return hi.build_levels(default_schedule(3), options=hi.TOY_OPTIONS)


class TestEmpirical:
    def test_single_point(self):
        rep = dim.empirical_box_count([[0.3, 0.4]], [0.25, 0.125, 0.0625])
        assert rep.counts == (1, 1, 1)

    def test_exact_power_slopes(self):
        scales = tuple(2.0 ** -j for j in range(2, 9))
        rep = dim.BoxCountReport(
            scales=scales, counts=tuple(int(1 / e) for e in scales),
            source="empirical-grid", trusted=(True,) * len(scales),
            trust_window=(0.0, 1.0))
        slope, _ = dim.dimension_slope(rep)
        assert slope == pytest.approx(1.0, abs=1e-9)
        rep2 = dim.BoxCountReport(
            scales=scales, counts=tuple(int(1 / e) ** 2 for e in scales),
            source="empirical-grid", trusted=(True,) * len(scales),
            trust_window=(0.0, 1.0))
        slope2, _ = dim.dimension_slope(rep2)
        assert slope2 == pytest.approx(2.0, abs=1e-9)

    def test_segment_calibration(self):
        rng = np.random.default_rng(101)
        pts = np.column_stack([rng.uniform(0, 1, 100_000), np.zeros(100_000)])
        rep = dim.empirical_box_count(pts, [2.0 ** -j for j in range(2, 9)])
        slope, _ = dim.dimension_slope(rep)
        assert abs(slope - 1.0) <= 0.05

    def test_square_calibration(self):
        rng = np.random.default_rng(102)
        pts = rng.uniform(0, 1, (100_000, 2))
        rep = dim.empirical_box_count(pts, [2.0 ** -j for j in range(2, 9)])
        slope, _ = dim.dimension_slope(rep)
        assert abs(slope - 2.0) <= 0.05

    def test_monotone_under_refinement(self):
        rng = np.random.default_rng(103)
        pts = rng.uniform(0, 1, (5_000, 2))
        rep = dim.empirical_box_count(pts, [2.0 ** -j for j in range(1, 10)])
        assert all(b >= a for a, b in zip(rep.counts, rep.counts[1:]))

    def test_scale_guard_marks_extrapolation(self):
        rng = np.random.default_rng(104)
        pts = np.column_stack([rng.uniform(0, 1, 200), np.zeros(200)])
        tiny = 1e-9
        rep = dim.empirical_box_count(pts, [0.25, 0.125, tiny])
        assert rep.trusted[-1] is False or rep.trusted[-1] == False  # noqa: E712
        with pytest.raises(ValueError):
            dim.dimension_slope(rep)  # only 2 trusted scales remain

    def test_empty_scales_rejected(self):
        with pytest.raises(ValueError):
            dim.empirical_box_count([[0.0, 0.0]], [])


class TestTheoretical:
    def test_level1_count(self, toy_levels):
        src = dim.counts_from_levels(toy_levels)
        w, c, flag = dim.theoretical_box_count(src, 1)
        assert w == pytest.approx(16 / 81)
        assert c == 4
        assert flag == "exact"

    def test_bound_flagged(self):
        src = dim.counts_from_bounds(default_schedule(3), net_limit=5)
        assert src.flags == ("exact", "bound", "bound")
        _, c2, flag2 = dim.theoretical_box_count(src, 2)
        assert flag2 == "bound"
        assert c2 > 0

    def test_bounds_dominate_exact_counts(self, toy_levels):
        exact = dim.counts_from_levels(toy_levels)
        bound = dim.counts_from_bounds(default_schedule(3), net_limit=5)
        for k in range(2, 4):
            assert exact.counts[k - 1] <= bound.counts[k - 1]


class TestClaim:
    def test_toy_terms_finite_positive(self, toy_levels):
        src = dim.counts_from_levels(toy_levels)
        for p in (1.2, 1.5, 1.8):
            rep = dim.check_claim(p, 3, src)
            assert rep.finite
            assert all(math.isfinite(t) for t in rep.log_terms_tilde)
            assert len(rep.factors) == 2

    def test_p_out_of_range(self, toy_levels):
        src = dim.counts_from_levels(toy_levels)
        for bad in (1.0, 2.0, 0.5):
            with pytest.raises(ValueError):
                dim.check_claim(bad, 3, src)

    def test_first_term_is_c1(self, toy_levels):
        # E_0 = 0 makes the first term exactly |C_1|
        src = dim.counts_from_levels(toy_levels)
        rep = dim.check_claim(1.5, 3, src)
        assert rep.log_terms[0] == pytest.approx(math.log(4))

    def test_decay_regime_trends_down(self):
        # with s_k in the thousands the decay factor dominates the growth
        sched = claim_demo_schedule()
        src = dim.counts_from_bounds(sched)
        for p in (1.2, 1.5, 1.8):
            rep = dim.check_claim(p, 4, src)
            assert rep.finite
            assert rep.trend_from_k2, (p, rep.log_terms)
            for f in rep.factors:
                # displayed middle factor dominates the actual growth factor
                assert f["log_growth_actual"] <= f["log_growth_displayed"]

    def test_tilde_variant_emitted(self, toy_levels):
        src = dim.counts_from_levels(toy_levels)
        rep = dim.check_claim(1.5, 3, src)
        # sTilde = s on the toy schedule, so the variants coincide
        assert rep.log_terms_tilde == pytest.approx(
            tuple(t + 0.0 for t in rep.log_terms))


def test_log_big_matches_math_log():
    assert dim._log_big(12345) == pytest.approx(math.log(12345))
    huge = 3 ** 5000
    approx = dim._log_big(huge)
    assert approx == pytest.approx(5000 * math.log(3), rel=1e-12)
