"""Rate-law module: closed-form anchors, quadrature oracle, expansions."""

import math

import numpy as np
import pytest

from blowlab.scaling import (
    InvalidParameter,
    ProblemParams,
    ScalingMap,
    anchor_ell,
    build_scaling_map,
    h_expansion,
    kappa_alpha,
    ln_psi1_expansion,
    tail_time_integral,
)


def params(p, alpha, **kw):
    return ProblemParams(p=p, alpha=alpha, **kw)


class TestKappa:
    def test_p2_alpha0_is_one(self):
        assert kappa_alpha(params(2.0, 0.0)) == pytest.approx(1.0, abs=0)

    def test_p3_alpha1(self):
        assert kappa_alpha(params(3.0, 1.0)) == pytest.approx(2.0 ** (-0.5), rel=1e-12)

    def test_p2_alpha_minus1(self):
        assert kappa_alpha(params(2.0, -1.0)) == pytest.approx(2.0, rel=1e-12)

    def test_p_leq_1_rejected(self):
        with pytest.raises(InvalidParameter):
            params(1.0, 0.0)


def brute_force_tail(psi, p, alpha):
    """Independent oracle: fixed-grid composite Simpson in v = ln u on [psi, 1e12]."""
    v = np.linspace(math.log(psi), math.log(1e12), 200001)
    f = np.exp((1.0 - p) * v) * np.log(np.exp(2 * v) + 2.0) ** (-alpha)
    w = np.ones_like(v)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    val = float(np.dot(w, f)) * (v[1] - v[0]) / 3.0
    # analytic tail bound beyond 1e12, negligible at the comparison tolerance
    u_end = 1e12
    val += u_end ** (1 - p) / ((p - 1) * math.log(u_end**2) ** alpha)
    return val


class TestTailIntegral:
    def test_p2_alpha0_closed_form(self):
        assert tail_time_integral(100.0, params(2.0, 0.0)) == pytest.approx(0.01, rel=1e-12)

    def test_p3_alpha0_closed_form(self):
        assert tail_time_integral(10.0, params(3.0, 0.0)) == pytest.approx(0.005, rel=1e-12)

    def test_p2_alpha1_against_simpson_oracle(self):
        got = tail_time_integral(100.0, params(2.0, 1.0))
        want = brute_force_tail(100.0, 2.0, 1.0)
        assert got == pytest.approx(want, rel=1e-8)

    def test_p3_alpha2_against_simpson_oracle(self):
        got = tail_time_integral(50.0, params(3.0, 2.0))
        want = brute_force_tail(50.0, 3.0, 2.0)
        assert got == pytest.approx(want, rel=1e-8)

    def test_degenerate_psi_rejected(self):
        with pytest.raises(ValueError):
            tail_time_integral(0.5, params(2.0, 1.0))


class TestBuildMap:
    def test_alpha0_p2_exact(self):
        pr = params(2.0, 0.0, s0=1.0)
        sm = build_scaling_map(pr, 10.0)
        assert np.max(np.abs(sm.ell - sm.s_grid)) < 1e-10
        assert np.max(np.abs(sm.h - 1.0)) < 1e-10

    def test_alpha0_general_p_exact(self):
        pr = params(3.0, 0.0, s0=2.0)
        sm = build_scaling_map(pr, 30.0)
        expect = (sm.s_grid - math.log(2.0)) / 2.0
        assert np.max(np.abs(sm.ell - expect)) < 1e-10
        assert np.max(np.abs(sm.h - 0.5)) < 1e-10

    def test_anchor_consistency_both_ends(self):
        pr = params(3.0, 1.0, s0=20.0)
        sm = build_scaling_map(pr, 40.0)
        assert abs(sm.ell[0] - anchor_ell(20.0, pr)) < 1e-10
        assert abs(sm.ell[-1] - anchor_ell(40.0, pr)) < 1e-10

    def test_monotone_and_positive(self):
        sm = build_scaling_map(params(2.0, 1.0, s0=5.0), 30.0)
        assert np.all(np.diff(sm.ell) > 0)
        assert np.all(sm.h > 0)

    def test_h_matches_lemma_expansion_p3_alpha1(self):
        pr = params(3.0, 1.0, s0=20.0)
        sm = build_scaling_map(pr, 200.0, store_stride=10)
        for s in (50.0, 100.0, 200.0):
            resid = abs(float(sm.h_at(s) - h_expansion(s, pr)))
            assert resid * s * s < 2.0, f"s={s}: scaled residual {resid * s * s}"
        assert float(sm.h_at(100.0)) == pytest.approx(0.494770, abs=2e-4)

    def test_ratio_to_kappa_p3_alpha1_within_5pct_at_40(self):
        sm = build_scaling_map(params(3.0, 1.0, s0=20.0), 41.0)
        assert 0.95 <= float(sm.ratio_to_kappa(40.0)) <= 1.05

    def test_ratio_matches_second_order_expansion(self):
        # ln ratio = [alpha^2 ln s - alpha (p-1) ln kappa - alpha]/((p-1) s) + h.o.t.
        for (p, a) in ((2.0, 1.0), (3.0, 1.0), (2.0, -1.0)):
            pr = params(p, a, s0=20.0)
            sm = build_scaling_map(pr, 41.0)
            s = 40.0
            predicted = math.exp(
                (a * a * math.log(s) - a * (p - 1) * math.log(kappa_alpha(pr)) - a)
                / ((p - 1) * s)
            )
            assert float(sm.ratio_to_kappa(s)) == pytest.approx(predicted, abs=0.011)

    def test_ratio_approaches_one_at_large_s(self):
        pr = params(2.0, 1.0, s0=20.0)
        sm = build_scaling_map(pr, 400.0, store_stride=10)
        r40 = abs(float(sm.ratio_to_kappa(40.0)) - 1.0)
        r400 = abs(float(sm.ratio_to_kappa(400.0)) - 1.0)
        assert r400 < 0.25 * r40

    def test_smax_not_above_s0_rejected(self):
        with pytest.raises(InvalidParameter):
            build_scaling_map(params(2.0, 1.0, s0=20.0), 20.0)


class TestExpansions:
    def test_h_expansion_alpha0(self):
        assert float(h_expansion(50.0, params(2.0, 0.0))) == 1.0

    def test_h_expansion_p3_alpha2_s100(self):
        val = float(h_expansion(100.0, params(3.0, 2.0)))
        assert val == pytest.approx(0.489079, abs=5e-7)

    def test_ln_psi1_expansion_p2_alpha1_s100(self):
        val = float(ln_psi1_expansion(100.0, params(2.0, 1.0)))
        assert val == pytest.approx(100.0 - math.log(100.0), rel=1e-12)
        assert val == pytest.approx(95.3948, abs=1e-4)


class TestSerialization:
    def test_json_roundtrip(self):
        sm = build_scaling_map(params(3.0, 1.0, s0=20.0), 22.0)
        sm2 = ScalingMap.from_json(sm.to_json())
        assert np.allclose(sm2.ell, sm.ell)
        assert np.allclose(sm2.h, sm.h)
        assert sm2.params == sm.params
        assert float(sm2.h_at(21.0)) == pytest.approx(float(sm.h_at(21.0)), rel=1e-12)
