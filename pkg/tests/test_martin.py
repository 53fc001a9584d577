import math

import numpy as np
import pytest
from scipy.special import gamma as Gamma

from sbmkit.domains import ball
from sbmkit.errors import ParameterError
from sbmkit.martin import (MartinProbe, estimate_martin, growth_lemma_check, martin_limit_report,
                           oscillation_decay, stable_ball_green, stable_ball_martin)
from sbmkit.simulate import PathConfig

from conftest import model

X0 = np.zeros(3)
Z = np.array([1.0, 0, 0])
XG = np.array([[0.0, 0.5, 0], [-0.5, 0, 0], [0.3, 0.3, 0.3]])


def test_ball_green_frozen():
    # independent high-precision quadrature of the closed form
    g = stable_ball_green(1.0, 3, 1.0, [0.3, 0, 0], [0, 0.5, 0])
    assert g == pytest.approx(0.121733753023564, rel=1e-12)


def test_ball_green_symmetry_and_free_limit():
    x, y = np.array([0.1, 0.2, -0.3]), np.array([-0.4, 0.1, 0.2])
    assert stable_ball_green(1.2, 3, 1, x, y) == pytest.approx(stable_ball_green(1.2, 3, 1, y, x), rel=1e-12)
    # huge ball: the free-space Riesz kernel
    alpha, d = 1.2, 3
    h = np.linalg.norm(x - y)
    free = Gamma((d - alpha) / 2) / (2**alpha * math.pi ** (d / 2) * Gamma(alpha / 2)) * h ** (alpha - d)
    assert stable_ball_green(alpha, d, 1e5, x, y) == pytest.approx(free, rel=1e-4)


def test_ball_martin_is_green_ratio_limit():
    x = np.array([0.2, 0.4, 0])
    ratios = [stable_ball_green(1.0, 3, 1, x, (1 - e) * Z) / stable_ball_green(1.0, 3, 1, X0, (1 - e) * Z)
              for e in (1e-3, 1e-4, 1e-5)]
    M = stable_ball_martin(1.0, 3, 1, x, Z, X0)
    err = [abs(r - M) for r in ratios]
    assert err[2] < err[1] < err[0] and err[2] < 1e-3 * M
    assert stable_ball_martin(1.0, 3, 1, X0, Z, X0) == 1.0


def test_probe_validation():
    dom = ball(3)
    p = MartinProbe.geometric(dom, Z, X0, XG, levels=4)
    assert p.levels == 4
    assert np.all(np.diff(np.linalg.norm(p.approach - Z, axis=1)) < 0)
    with pytest.raises(ParameterError):
        MartinProbe(dom, X0, XG, Z, p.approach[::-1])
    with pytest.raises(ParameterError):
        MartinProbe(dom, X0, [[2.0, 0, 0]], Z, p.approach)
    with pytest.raises(ParameterError):
        MartinProbe(dom, X0, [p.approach[0] + [0, 0.01, 0]], Z, p.approach)


def _oracle(x, y):
    return stable_ball_green(1.0, 3, 1, x, y) / stable_ball_green(1.0, 3, 1, X0, y)


def test_martin_estimate_matches_oracle():
    p = MartinProbe.geometric(ball(3), Z, X0, XG, levels=3)
    rep = martin_limit_report(p, model("stable"), PathConfig(dt=1e-3, seed=3), N=5000, oracle=_oracle)
    assert rep.constants["max_oracle_z"] < 3
    assert rep.details["M"].shape == (3, 3)


def test_hunt_and_kde_agree():
    p = MartinProbe.geometric(ball(3), Z, X0, XG[:2], levels=2, bandwidth=0.1)
    cfg = PathConfig(dt=1e-4, seed=5)
    h = estimate_martin(p, model("stable"), cfg, N=4000)
    k = estimate_martin(p, model("stable"), cfg, N=4000, method="kde")
    z = np.abs(h["M"] - k["M"]) / np.hypot(h["se"], k["se"])
    assert np.all(z < 4)
    with pytest.raises(ParameterError):
        estimate_martin(p, model("stable"), cfg, N=10, method="bogus")


def test_oscillation_and_growth():
    p = MartinProbe.geometric(ball(3), Z, X0, XG, levels=3)
    rep = oscillation_decay(p, model("stable"), PathConfig(dt=1e-3, seed=2), N=5000)
    assert rep.passed and rep.constants["beta_hat"] > 0
    g = growth_lemma_check(model("stable"), ball(3), Z, 0.5, N=4000, cfg=PathConfig(dt=1e-3, seed=2))
    assert g.constants["gamma_hat"] < 1.0 and g.passed
