import math

import numpy as np
import pytest

import oracles
from graphnls import analytic_line as al
from graphnls.analytic_line import LineConstants, NonlinearityParams


def test_exponents_examples():
    assert al.exponents(4.0) == (1.0, 1.0)
    a, b = al.exponents(3.0)
    assert a == pytest.approx(2 / 3, abs=1e-15) and b == pytest.approx(1 / 3, abs=1e-15)
    a, b = al.exponents(2.0 + 1e-12)
    assert a == pytest.approx(0.5) and b == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p", [2.0, 6.0, 1.0, 7.5])
def test_exponents_reject_range(p):
    with pytest.raises(ValueError):
        al.exponents(p)


@pytest.mark.parametrize("kw", [dict(p=6.0, q=3.0), dict(p=4.0, q=4.0), dict(p=4.0, q=2.0),
                                dict(p=4.0, q=3.0, tau=-1.0), dict(p=4.0, q=3.0, mu=0.0),
                                dict(p=4.0, q=3.0, mu=math.nan)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        NonlinearityParams(**kw)


@pytest.mark.parametrize("p,q,regime", [(4.0, 2.5, "below"), (4.0, 3.0, "critical"), (4.0, 3.5, "above"),
                                        (3.0, 2.4, "below"), (5.0, 3.6, "above")])
def test_regime_flag(p, q, regime):
    P = NonlinearityParams(p, q)
    assert P.regime == regime
    # alpha q < 2 beta + 1  <=>  q < p/2 + 1
    if regime != "critical":
        assert (P.alpha * q < 2 * P.beta + 1) == (regime == "below")


def test_regime_equivalence_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p, q = rng.uniform(2.05, 5.95), rng.uniform(2.05, 3.95)
        a, b = al.exponents(p)
        if abs(q - (p / 2 + 1)) > 1e-9:
            assert (a * q < 2 * b + 1) == (q < p / 2 + 1) == al.regime_below(p, q)


@pytest.mark.criterion(1)
@pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 5.0, 5.5])
def test_theta_peak_identity(p):
    assert al.verify_identity_appendixA(p) < 1e-8


@pytest.mark.criterion(1)
def test_p4_closed_forms():
    c = LineConstants.for_p(4.0)
    assert abs(c.omega1 - oracles.P4_OMEGA1) < 1e-10
    assert abs(c.phi1_at_0 - oracles.P4_PHI1_0) < 1e-10
    assert abs(c.theta_p - oracles.P4_THETA) < 1e-10


@pytest.mark.criterion(1)
def test_p4_theta_against_direct_quadrature():
    assert abs(-al.soliton_energy_quadrature(4.0, 1.0) - oracles.P4_THETA) < 1e-10


def test_frequency_random_p_against_closed_form():
    rng = np.random.default_rng(11)
    for p in rng.uniform(2.2, 5.8, size=50):
        w = al.soliton_frequency(float(p))
        assert w == pytest.approx(oracles.unit_frequency(float(p)), rel=1e-9)
        assert al.closed_form_mass(float(p), w) == pytest.approx(1.0, rel=1e-9)
        assert al.verify_identity_appendixA(float(p)) < 1e-8


def test_theta_matches_independent_oracle():
    for p in (2.5, 3.0, 4.0, 5.0, 5.5):
        assert al.theta(p) == pytest.approx(oracles.theta(p), rel=1e-9)
        assert al.theta(p) > 0


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 5.0])
def test_mass_increasing_in_frequency(p):
    ws = np.logspace(-3, 2, 25)
    m = [al.profile_mass(p, w) for w in ws]
    assert np.all(np.diff(m) > 0)


def test_profile_solves_ode():
    p, w = 3.5, 0.7
    x = np.linspace(-6, 6, 2001)
    h = x[1] - x[0]
    u = al.profile(p, w, x)
    upp = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    res = -upp + w * u[1:-1] - u[1:-1] ** (p - 1)
    assert np.max(np.abs(res)) < 1e-4 * np.max(u)


def test_profile_no_overflow_far_out():
    assert np.all(np.isfinite(al.profile(4.0, 1.0, np.array([1e3, 1e5]))))


@pytest.mark.criterion(2)
@pytest.mark.parametrize("p", [3.0, 4.0, 5.0])
@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 4.0])
def test_soliton_energy_law(p, mu):
    quad = al.soliton_energy_quadrature(p, mu)
    law = -al.theta(p) * mu ** (2 * al.exponents(p)[1] + 1)
    assert abs(quad / law - 1) < 1e-6


@pytest.mark.parametrize("p", [3.0, 4.0, 5.0])
def test_soliton_mass(p):
    for mu in (0.3, 1.0, 7.0):
        assert al.soliton_mass_quadrature(p, mu) == pytest.approx(mu, rel=1e-9)


def test_soliton_eval_scaling():
    p, mu = 3.0, 2.5
    a, b = al.exponents(p)
    x = np.linspace(0, 5, 11)
    assert np.allclose(al.soliton_eval(p, mu, x), mu**a * al.soliton_eval(p, 1.0, mu**b * x), rtol=1e-14)


def test_soliton_eval_rejects_nonpositive_mass():
    with pytest.raises(ValueError):
        al.soliton_eval(4.0, 0.0, 1.0)


def test_params_helpers():
    P = NonlinearityParams(4.0, 3.0, 1.0, 2.0)
    assert P.with_mu(3.0).mu == 3.0 and P.with_tau(0.0).tau == 0.0
    assert P.soliton_level == pytest.approx(-8 / 96)
    assert P.to_dict()["regime"] == "critical"
