import math

import numpy as np
import pytest

from landscape_counting.discretize import build_grid
from landscape_counting.landscape import landscape
from landscape_counting.potential import PolynomialPotential, constant, harmonic, maximal_m, simon
from landscape_counting.verify import (EquivalenceReport, diagnose_discreteness_numeric,
                                       diagnose_discreteness_polynomial, domain_adequate,
                                       equivalence_lift, equivalence_m_M, equivalence_u_m,
                                       growth_exponent, interior_sample, l1_probe, multiscale_sample,
                                       run_verify,
                                       sandwich_constants, slow_variation, taylor_constant)

X2 = PolynomialPotential({(2,): 1.0})
X2_2D = PolynomialPotential({(2, 0): 1.0})


class TestSandwichConstants:
    def test_weyl_like_data(self):
        # N(mu) = 2 mu, V(mu) = mu^(1/2), d = 1: any c <= 1 works, C must reach 2
        mus = np.arange(1.0, 11.0)
        rep = sandwich_constants((2 * mus).astype(int), np.sqrt, 1, mus)
        assert rep.c_est == 1.0
        assert 2.0 <= rep.C_est <= 2.0 * 10 ** (1 / 200) * (1 + 1e-12)
        assert rep.valid

    def test_vacuous_lower_bound(self):
        mus = np.array([0.1, 0.2, 0.3])
        rep = sandwich_constants([0, 0, 0], lambda x: np.where(x < 0.5, 0.0, 1.0), 2, mus)
        assert rep.c_est == 1.0
        assert rep.C_est is not None and rep.upper_holds

    def test_violation_reported(self):
        mus = np.array([1.0, 2.0])
        rep = sandwich_constants([5, 6], lambda x: np.zeros_like(x), 1, mus)
        assert rep.C_est is None and not rep.valid
        assert any("upper bound violated" in f for f in rep.findings)

    def test_rows_recheckable(self):
        mus = np.geomspace(1, 4, 5)
        counts = [1, 1, 2, 2, 3]
        vol = lambda x: 0.8 * np.sqrt(x)
        rep = sandwich_constants(counts, vol, 1, mus)
        for row in rep.rows:
            assert (rep.c_est * row["mu"]) ** 0.5 * row["vol_c"] == pytest.approx(row["lower"])
            assert row["lower"] <= row["count"] <= row["upper"]
        assert rep.c_est <= rep.C_est


def test_run_verify_harmonic_1d():
    g = build_grid(1, 10.0, 1999, margin_fraction=0.1)  # h = 0.01
    res = run_verify(harmonic(1), g, mu_grid=np.geomspace(2, 50, 20))
    s = res.sandwich
    assert s.c_est is not None and s.C_est is not None
    assert s.c_est <= 1 <= s.C_est and s.valid
    assert s.adequate
    assert res.chain_ok
    assert res.lemmas["upper_holds"] and res.lemmas["lower_holds"]
    assert res.harnack["C_H_estimate"] >= 1


def test_domain_adequacy_flag():
    g = build_grid(1, 3.0, 200, margin_fraction=0.2)
    sol = landscape(harmonic(1), g)
    from landscape_counting.landscape import effective_potential
    W = effective_potential(sol)
    assert domain_adequate(W, float(W.interior().min()) * 1.01)
    assert not domain_adequate(W, float(W.values.max()))


class TestEquivalences:
    def test_constant_u_m(self):
        g = build_grid(1, 20.0, 799, margin_fraction=0.3)
        rep = equivalence_u_m(landscape(constant(4.0, 1), g), constant(4.0, 1), count=50)
        np.testing.assert_allclose(rep.ratios, 2.0, rtol=1e-2)
        assert rep.spread >= 1.0

    @pytest.mark.parametrize("pot,g", [
        (harmonic(1), build_grid(1, 10.0, 255, margin_fraction=0.1)),
        (harmonic(2), build_grid(2, 8.0, 127, margin_fraction=0.1)),
    ])
    def test_u_m_refinement_stable(self, pot, g):
        pts = interior_sample(g, 100, seed=1)
        a = equivalence_u_m(landscape(pot, g), pot, pts)
        b = equivalence_u_m(landscape(pot, g.refined()), pot, pts)
        assert np.isfinite(a.spread)
        assert abs(b.spread / a.spread - 1) <= 0.2

    def test_u_m_interior_only(self):
        g = build_grid(1, 5.0, 99, margin_fraction=0.2)
        with pytest.raises(ValueError):
            equivalence_u_m(landscape(X2, g), X2, np.array([[g.axis[0]]]))

    def test_m_M_examples(self):
        rep0 = equivalence_m_M(X2, [[0.0]])
        assert rep0.min == pytest.approx((2 / 3) ** 0.25 / 2 ** 0.25, rel=1e-8)
        assert rep0.min == pytest.approx(0.760, abs=1e-3)
        rep10 = equivalence_m_M(X2, [[10.0]])
        assert rep10.min == pytest.approx(14.14 / 13.90, abs=2e-3)

    @pytest.mark.parametrize("pot", [X2, harmonic(2), simon()])
    def test_m_M_spread_stable(self, pot):
        pts = multiscale_sample(pot.dimension, 400, 50.0, seed=7)
        a = equivalence_m_M(pot, pts[:200])
        b = equivalence_m_M(pot, pts)
        assert np.isfinite(a.spread) and abs(b.spread / a.spread - 1) <= 0.2

    def test_multiscale_sample(self):
        a = multiscale_sample(2, 50, 50.0, seed=3)
        b = multiscale_sample(2, 100, 50.0, seed=3)
        np.testing.assert_array_equal(a, b[:50])
        r = np.linalg.norm(b, axis=1)
        assert r.min() >= 1e-2 and r.max() <= 50.0
        with pytest.raises(ValueError):
            multiscale_sample(1, 5, 1e-3)

    def test_lift_bounded(self):
        pts = np.random.default_rng(0).uniform(-20, 20, size=(100, 1))
        rep = equivalence_lift(X2, pts)
        assert rep.spread < 2 and 0.5 < rep.min <= rep.max < 2
        rep2 = equivalence_lift(simon(), np.random.default_rng(1).uniform(-5, 5, size=(30, 2)))
        assert np.isfinite(rep2.spread)

    @pytest.mark.parametrize("pot", [X2, simon()])
    def test_slow_variation_stable(self, pot):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-10, 10, size=(400, pot.dimension))
        a = slow_variation(pot, pts[:200])
        b = slow_variation(pot, pts)
        assert np.isfinite(a.fitted_constant)
        assert abs(b.fitted_constant / a.fitted_constant - 1) <= 0.2

    def test_growth_exponent_finite(self):
        pts = np.random.default_rng(2).uniform(-20, 20, size=(200, 2))
        rep = growth_exponent(simon(), pts)
        assert np.isfinite(rep.fitted_exponent) and rep.fitted_exponent >= 0
        assert rep.fitted_constant >= 1

    def test_taylor_constant_finite(self):
        for pot in (X2, harmonic(2), simon()):
            pts = np.random.default_rng(3).uniform(-20, 20, size=(200, pot.dimension))
            rep = taylor_constant(pot, pts)
            assert np.isfinite(rep.fitted_constant) and rep.fitted_constant > 0

    def test_report_rejects_bad_ratios(self):
        with pytest.raises(ValueError):
            EquivalenceReport.from_ratios("u-vs-m", [1.0, 0.0])
        with pytest.raises(ValueError):
            EquivalenceReport.from_ratios("u-vs-m", [])


class TestDiscreteness:
    def test_polynomial(self):
        assert diagnose_discreteness_polynomial(simon())
        assert not diagnose_discreteness_polynomial(X2_2D)
        assert diagnose_discreteness_polynomial(harmonic(2))

    def test_numeric_harmonic(self):
        g = build_grid(2, 10.0, 127, margin_fraction=0.1)
        rep = diagnose_discreteness_numeric(landscape(harmonic(2), g), [0, 2, 4, 6])
        assert rep.consistent and rep.verdict == "consistent with discrete"
        assert "not a proof" in rep.note

    def test_numeric_x2_in_2d(self):
        g = build_grid(2, 10.0, 127, margin_fraction=0.1)
        rep = diagnose_discreteness_numeric(landscape(X2_2D, g), [0, 2, 4, 6])
        assert not rep.consistent and rep.verdict == "not consistent"

    def test_numeric_constant(self):
        g = build_grid(2, 10.0, 99, margin_fraction=0.2)
        rep = diagnose_discreteness_numeric(landscape(constant(9.0, 2), g), [0, 2, 4])
        assert not rep.consistent
        np.testing.assert_allclose(rep.values, 1 / 9, rtol=1e-6)

    def test_numeric_errors(self):
        g = build_grid(1, 5.0, 99, margin_fraction=0.1)
        sol = landscape(X2, g)
        with pytest.raises(ValueError):
            diagnose_discreteness_numeric(sol, [0, 10])
        with pytest.raises(ValueError):
            diagnose_discreteness_numeric(sol, [2, 1])


class TestL1Probe:
    def test_simon_form_domain(self):
        rep = l1_probe(simon(), [5, 10, 20, 40], 40 / 128)
        assert rep.consistent and rep.verdict == "L1 (form domain)"

    def test_harmonic_3d_not_integrable(self):
        rep = l1_probe(harmonic(3), [2, 4, 8], 0.5)
        assert not rep.consistent

    def test_constant_not_integrable(self):
        rep = l1_probe(constant(1.0, 1), [5, 10, 20], 0.1)
        assert not rep.consistent and rep.verdict == "not L1 at tested scale"

    def test_needs_nested_boxes(self):
        with pytest.raises(ValueError):
            l1_probe(X2, [5, 10], 0.1)
        with pytest.raises(ValueError):
            l1_probe(X2, [5, 4, 10], 0.1)


def test_m_positive_on_simon_axes():
    for x in (0.0, 10.0, 40.0):
        assert 0 < maximal_m(simon(), [x, 0.0]) < math.inf
