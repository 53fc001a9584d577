import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit.bernstein import SubordinatorModel
from sbmkit.errors import DomainError, ParameterError, TransienceError
from sbmkit.kernels import (KernelEvaluator, check_asymptotics, check_lemma_lJ, check_regvar_inequalities,
                            green_const, green_free, jump_const, jump_kernel, stable_green, stable_jump)

from conftest import family, model

KS = KernelEvaluator(model("stable"), 3)


def test_stable_oracles():
    assert green_free(KS, np.array([1.0, 0, 0])) == pytest.approx(1 / (2 * math.pi**2), abs=1e-12)
    assert jump_kernel(KS, 1.0) == pytest.approx(1 / math.pi**2, abs=1e-12)
    assert green_free(KS, 0.1) == pytest.approx(100 * green_free(KS, 1.0), rel=1e-10)
    assert jump_kernel(KS, 0.5) == pytest.approx(2**4 * jump_kernel(KS, 1.0), rel=1e-10)


def test_constants_consistent_with_riesz():
    for alpha in (0.5, 1.0, 1.5):
        for d in (2, 3, 4):
            if d > alpha:
                assert green_const(alpha, d) == pytest.approx(float(stable_green(alpha, d, 1.0)), rel=1e-13)
            assert jump_const(alpha, d) == pytest.approx(float(stable_jump(alpha, d, 1.0)), rel=1e-13)


@given(st.floats(0.2, 1.8), st.floats(1e-3, 10.0))
@settings(max_examples=10, deadline=None)
def test_stable_quadrature_matches_closed_form(alpha, r):
    ke = KernelEvaluator(SubordinatorModel(family("stable").__class__("stable", alpha)), 3)
    assert ke.green(r) == pytest.approx(float(stable_green(alpha, 3, r)), rel=1e-9)
    assert ke.jump(r) == pytest.approx(float(stable_jump(alpha, 3, r)), rel=1e-9)


def test_frozen_jump_values():
    # 30-digit mpmath subordination integrals with the closed-form Levy densities
    kr = KernelEvaluator(model("relativistic"), 3)
    assert kr.jump(0.1) == pytest.approx(1010.69889194391, rel=1e-9)
    assert kr.jump(1.0) == pytest.approx(0.0823153002189143, rel=1e-9)
    km = KernelEvaluator(model("mixture"), 3)
    assert km.jump(0.01) == pytest.approx(10608320.6337406, rel=1e-9)


def test_mixture_green_ratio():
    km = KernelEvaluator(model("mixture"), 3)
    assert 0.98 <= km.green_ratio(1e-3) <= 1.02


def test_relativistic_jump_ratio():
    kr = KernelEvaluator(model("relativistic"), 3)
    assert 0.98 <= kr.jump_ratio(1e-3) <= 1.02


def test_tolerance_halving_stability():
    for name in ("mixture", "logpos"):
        a = KernelEvaluator(model(name), 3, tol=1e-10)
        b = KernelEvaluator(model(name), 3, tol=5e-11)
        r = np.array([1e-3, 1e-2, 1.0])
        assert np.allclose(a.green(r), b.green(r), rtol=1e-8, atol=0)
        assert np.allclose(a.jump(r), b.jump(r), rtol=1e-8, atol=0)


def test_radially_decreasing(any_family):
    ke = KernelEvaluator(SubordinatorModel(any_family), 3)
    r = np.logspace(-3, 1, 12)
    assert np.all(np.diff(ke.green(r)) < 0)
    assert np.all(np.diff(ke.jump(r)) < 0)


def test_errors():
    with pytest.raises(ParameterError):
        KernelEvaluator(model("stable"), 1)
    with pytest.raises(DomainError):
        KS.green(0.0)
    with pytest.raises(TransienceError):
        KernelEvaluator(model("relativistic"), 2).green(1.0)
    # the stable family with alpha < 2 is transient in d = 2
    assert KernelEvaluator(model("stable"), 2).green(1.0) > 0


def test_check_asymptotics():
    assert check_asymptotics(KS).passed
    for name in ("mixture", "relativistic"):
        assert check_asymptotics(KernelEvaluator(model(name), 3)).passed


def test_two_sided_jump_bound():
    rep = check_lemma_lJ(KS)
    assert rep.passed and rep.constants["r3"] == 1.0
    for name in ("relativistic", "logpos"):
        rep = check_lemma_lJ(KernelEvaluator(model(name), 3))
        assert rep.passed and rep.constants["r3"] > 0


def test_regvar_stable_constants():
    rep = check_regvar_inequalities(family("stable"), r4=1.0)
    assert rep.passed
    assert rep.constants["ineq1"] == 1.0
    assert rep.constants["ineq3"] == pytest.approx(2.0, rel=1e-8)


def test_regvar_mixture():
    rep = check_regvar_inequalities(family("mixture"), r4=0.25)
    assert rep.passed
    assert np.isfinite(rep.constants["ineq4"])
    assert rep.details["refinement_change"]["ineq4"] <= 0.05
