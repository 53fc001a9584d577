import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit.bernstein import (BernsteinFamily, Kind, SubordinatorModel, check_A1_A4, check_condition_2_5, ell,
                              laplace_residuals, levy_density_mu, phi, potential_density_u, spectral_mu,
                              spectral_u)
from sbmkit.errors import DomainError, ParameterError

from conftest import FAMILIES, family, model


def test_phi_examples():
    assert phi(BernsteinFamily("relativistic", 1.0), 3.0) == pytest.approx(1.0, rel=1e-15)
    assert phi(BernsteinFamily("stable", 1.0), 4.0) == 2.0
    assert phi(BernsteinFamily("mixture", 1.0, 0.5), 1.0) == 2.0


def test_ell_examples():
    assert np.all(ell(BernsteinFamily("stable", 1.3), np.logspace(-5, 9, 20)) == 1.0)
    assert ell(BernsteinFamily("mixture", 1.0, 0.5), 16.0) == pytest.approx(1.5, rel=1e-15)
    assert abs(ell(BernsteinFamily("relativistic", 1.0), 1e8) - 1.0) < 1e-3


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_phi_domain_error(bad):
    with pytest.raises(DomainError):
        phi(family("stable"), bad)


@pytest.mark.parametrize("args", [("stable", 0.0, None), ("stable", 2.0, None), ("mixture", 1.0, 1.0),
                                  ("mixture", 1.0, None), ("logpos", 1.5, 0.6), ("logneg", 1.0, 1.2),
                                  ("relativistic", 1.0, 0.3), ("cauchy", 1.0, None)])
def test_parameter_ranges(args):
    with pytest.raises(ParameterError):
        BernsteinFamily(*args)


def test_kind_is_coerced():
    assert BernsteinFamily("logneg", 1.0, 0.5).kind is Kind.LOGNEG


def test_grid_shape_invariants(any_family):
    lam = np.logspace(-6, 12, 400)
    f = any_family.phi(lam)
    assert np.all(np.diff(f) > 0)
    # second divided differences in lambda are <= 0 up to rounding
    d1 = np.diff(f) / np.diff(lam)
    d2 = np.diff(d1)
    assert np.all(d2 <= 1e-9 * np.abs(d1[1:]))
    assert any_family.phi(1e-300) < 1e-50
    # ell tends to a positive limit (or is slowly varying) on the grid
    tail = any_family.ell(np.logspace(10, 12, 5))
    assert np.all(np.isfinite(tail)) and np.all(tail > 0)


@pytest.mark.parametrize("name", ["stable", "relativistic"])
def test_ell_limit_one(name):
    assert abs(family(name).ell(1e12) - 1.0) < 1e-5


@given(st.floats(1e-6, 1e12), st.floats(1.0001, 50.0))
@settings(max_examples=60, deadline=None)
def test_phi_monotone_property(lam, factor):
    for name in FAMILIES:
        f = family(name)
        assert f.phi(lam * factor) > f.phi(lam)


@given(st.floats(1e-8, 1e10))
@settings(max_examples=60, deadline=None)
def test_log_ell_matches_ell(lam):
    for name in FAMILIES:
        f = family(name)
        assert f.log_ell(lam) == pytest.approx(math.log(f.ell(lam)), abs=1e-10)


def test_stable_closed_forms():
    m = model("stable")
    assert potential_density_u(m, 1.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    assert levy_density_mu(m, 1.0) == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-14)
    t = np.logspace(-10, -4, 5)
    assert np.allclose(m.u(t) * t**0.5 * math.gamma(0.5), 1.0, rtol=1e-14)


def test_stable_laplace_consistency():
    m = model("stable")
    assert laplace_residuals(m, [0.1, 1.0, 10.0], "u").max() < 1e-6
    assert laplace_residuals(m, [0.1, 1.0, 10.0], "mu").max() < 1e-6


def test_mixture_mu_additive():
    m = model("mixture")
    a, b = 0.5, 0.25
    expect = a / math.gamma(1 - a) + b / math.gamma(1 - b)
    assert levy_density_mu(m, 1.0) == pytest.approx(expect, rel=1e-14)
    assert laplace_residuals(m, [0.1, 1.0, 10.0], "mu").max() < 1e-6
    assert laplace_residuals(m, [0.1, 1.0, 10.0], "u").max() < 1e-6


def test_relativistic_u_small_t():
    m = model("relativistic")
    t = 1e-4
    pred = t**-0.5 / math.gamma(0.5) / m.family.ell(1 / t)
    assert potential_density_u(m, t) / pred == pytest.approx(1.0, abs=0.03)
    assert laplace_residuals(m, [0.5, 5.0], "u").max() < 1e-4


def test_relativistic_u_exact():
    # for alpha = 1, 1/phi = (sqrt(1 + p) + 1)/p inverts to 1 + erf(sqrt t) + e^-t/sqrt(pi t)
    m = model("relativistic")
    t = np.logspace(-5, 1.5, 40)
    exact = 1 + np.array([math.erf(math.sqrt(x)) for x in t]) + np.exp(-t) / np.sqrt(np.pi * t)
    assert np.allclose(m.u(t), exact, rtol=1e-6, atol=0)
    assert np.allclose(potential_density_u(m, t[::8]), exact[::8], rtol=1e-6, atol=0)


def test_relativistic_mu_small_t():
    m = model("relativistic")
    t = np.array([1e-6, 1e-8])
    assert np.allclose(m.mu(t) * t**1.5 * 2 * math.gamma(0.5), 1.0, rtol=1e-5)


def test_relativistic_mu_matches_spectral():
    # the closed form is validated against the Stieltjes representation, not assumed
    f = family("relativistic")
    m = SubordinatorModel(f)
    for t in (0.01, 1.0, 5.0):
        assert m.mu(t) == pytest.approx(spectral_mu(f, t), rel=1e-7)


# frozen from an independent 30-digit mpmath evaluation of the Stieltjes integrals
LOGPOS_FROZEN = {1.0: (0.801447795519232, 0.279001341972007), 0.01: (4.21263955919773, 428.284921861351)}


@pytest.mark.parametrize("t", sorted(LOGPOS_FROZEN))
def test_logpos_frozen(t):
    m = model("logpos")
    u, mu = LOGPOS_FROZEN[t]
    assert potential_density_u(m, t) == pytest.approx(u, rel=1e-6)
    assert levy_density_mu(m, t) == pytest.approx(mu, rel=1e-6)
    assert m.u(t) == pytest.approx(u, rel=1e-5)
    assert m.mu(t) == pytest.approx(mu, rel=1e-5)


@pytest.mark.parametrize("name", ["logpos", "logneg", "relativistic", "mixture"])
def test_inversion_vs_spectral(name):
    f = family(name)
    m = SubordinatorModel(f)
    for t in (0.03, 2.0):
        assert potential_density_u(m, t) == pytest.approx(spectral_u(f, t), rel=1e-6)
        assert levy_density_mu(m, t) == pytest.approx(spectral_mu(f, t), rel=1e-6)


@pytest.mark.parametrize("name", ["logpos", "logneg"])
def test_log_families_laplace(name):
    m = model(name)
    assert laplace_residuals(m, [0.3, 3.0], "u").max() < 1e-4
    assert laplace_residuals(m, [0.3, 3.0], "mu").max() < 1e-4


def test_u_mu_decreasing(any_family):
    m = SubordinatorModel(any_family)
    t = np.logspace(-6, 3, 200)
    u = m.u(t)
    c0 = any_family.potential_atom
    # strict where u - c0 is resolvable at the inversion tolerance, else
    # nonincreasing within it (relativistic u - 2 drops below 1e-16 by t = 40)
    resolvable = (u - c0)[1:] > 1e-5 * u[1:]
    assert np.all(np.diff(u)[resolvable] < 0)
    assert np.all(np.diff(u) <= 1e-6 * u[1:])
    t = np.logspace(-6, 1.5, 200)
    assert np.all(np.diff(m.mu(t)) < 0)


def test_condition_envelope():
    rep = check_condition_2_5(family("stable"))
    assert rep.passed
    assert np.all(rep.details["envelope"] == 0)
    assert check_condition_2_5(family("mixture")).passed
    rep = check_condition_2_5(family("logpos"))
    assert rep.passed and rep.details["dominated_by_case_bounds"]


def test_assumptions_stable():
    rep = check_A1_A4(model("stable"), d=3)
    assert rep.passed
    e = {x["assumption"]: x for x in rep.details["assumptions"]}
    assert e["A1"]["pass"] and e["A1"]["gamma"] == 0.5
    assert e["A4"]["constant"] == pytest.approx(2**1.5, rel=1e-12)


def test_assumptions_relativistic():
    assert check_A1_A4(model("relativistic"), d=3).passed
    # u(t) tends to a constant, so the transience exponent is 1 and d = 2 fails
    rep = check_A1_A4(model("relativistic"), d=2)
    assert not rep.passed


def test_report_json_fields():
    import json

    rep = check_A1_A4(model("mixture"))
    data = json.loads(rep.to_json())
    for entry in data["details"]["assumptions"]:
        assert {"assumption", "grid", "constant", "pass"} <= set(entry)
