import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit.bernstein import BernsteinFamily, SubordinatorModel
from sbmkit.domains import make_domain
from sbmkit.errors import HorizonExceeded, ParameterError
from sbmkit.estimators import stable_ball_exit_time
from sbmkit.simulate import (Orthants, PathConfig, RadialShells, harmonic_measure, relativistic_proposals,
                             sample_increments, sample_subordinator_increment, simulate_paths,
                             simulate_until_exit)

from conftest import model

BALL3 = make_domain("ball", 3)


def _laplace_z(model_, dt, lam, n, seed=1):
    s = sample_increments(model_, dt, n, seed=seed)
    w = np.exp(-lam * s)
    exact = math.exp(-dt * model_.family.phi(lam))
    return (w.mean() - exact) / (w.std(ddof=1) / math.sqrt(n))


@pytest.mark.parametrize("lam", [1.0, 10.0])
def test_stable_laplace_transform(lam):
    assert abs(_laplace_z(model("stable"), 0.1, lam, 1_000_000)) < 3


@pytest.mark.parametrize("name", ["mixture", "relativistic"])
@pytest.mark.parametrize("lam", [1.0, 10.0])
def test_laplace_transform(name, lam):
    assert abs(_laplace_z(model(name), 0.1, lam, 400_000, seed=2)) < 3


@pytest.mark.parametrize("name", ["logpos", "logneg"])
def test_compound_poisson_laplace_transform(name):
    for lam in (0.5, 3.0):
        assert abs(_laplace_z(model(name), 0.1, lam, 200_000, seed=3)) < 3


def test_increments_positive(any_family):
    s = sample_increments(SubordinatorModel(any_family), 1e-4, 20_000, seed=5)
    assert np.all(s > 0)


def test_relativistic_acceptance():
    dt = 0.5
    tries = relativistic_proposals(model("relativistic"), dt, 200_000, seed=4)
    rate = len(tries) / tries.sum()
    p = math.exp(-dt)
    # number of proposals is geometric with success probability e^-dt
    se = math.sqrt((1 - p) / p**2 / len(tries)) * p**2
    assert rate >= p * (1 - 1e-3) - 3 * se
    assert abs(rate - p) < 3 * se


def test_single_increment_matches_batch():
    m = model("mixture")
    batch = sample_increments(m, 0.01, 5, seed=9)
    assert sample_subordinator_increment(m, 0.01, (9, 3)) == batch[3]
    assert np.array_equal(sample_increments(m, 0.01, 2, seed=9, offset=3), batch[3:])


def test_path_config_validation():
    for kw in ({"dt": 0}, {"t_max": -1}, {"eps_jump": 0}, {"refine_levels": -1}, {"seed": -1}):
        with pytest.raises(ParameterError):
            PathConfig(**kw)


def test_exit_consistency():
    cfg = PathConfig(dt=1e-3, seed=3)
    for kind in ("ball", "lshape", "slitball", "twoballs"):
        dom = make_domain(kind, 2)
        x = dom.interior_point()
        b = simulate_paths(model("mixture"), dom, np.repeat(x[None], 500, axis=0), cfg)
        assert not np.any(dom.contains(b.exit_point))
        inside_pre = np.atleast_1d(dom.contains(b.pre_jump_point))
        # pre-jump points lie in the closure: inside, or on the boundary within rounding
        near = np.abs(dom.distance_to_boundary(b.pre_jump_point[~inside_pre])) < 1e-9
        assert np.all(near)
        assert np.all(b.exit_time > 0)
        # the last move must be long enough to leave from the pre-exit point
        step = np.linalg.norm(b.exit_point - b.pre_jump_point, axis=1)
        assert np.all(step + 1e-12 >= np.abs(dom.distance_to_boundary(b.pre_jump_point)))


def test_determinism_and_path_indexing():
    cfg = PathConfig(dt=1e-3, seed=11)
    x = np.zeros((200, 3))
    a = simulate_paths(model("stable"), BALL3, x, cfg)
    b = simulate_paths(model("stable"), BALL3, x, cfg)
    assert np.array_equal(a.exit_time, b.exit_time) and np.array_equal(a.exit_point, b.exit_point)
    # a path's randomness depends on its index only, not on how the batch is split
    c = simulate_paths(model("stable"), BALL3, x[:80], cfg, path_offset=120)
    assert np.array_equal(c.exit_time, a.exit_time[120:])
    d = simulate_paths(model("stable"), BALL3, x, PathConfig(dt=1e-3, seed=12))
    assert not np.array_equal(d.exit_time, a.exit_time)


def test_simulate_until_exit_record():
    cfg = PathConfig(dt=1e-3, seed=2)
    rec = simulate_until_exit(model("stable"), BALL3, np.zeros(3), cfg, rng_state=7)
    batch = simulate_paths(model("stable"), BALL3, np.zeros((8, 3)), cfg)
    assert rec.exit_time == batch.exit_time[7]
    assert not BALL3.contains(rec.exit_point)
    with pytest.raises(ParameterError):
        simulate_until_exit(model("stable"), BALL3, np.array([2.0, 0, 0]), cfg)


def test_start_on_boundary_shell():
    cfg = PathConfig(dt=1e-4, seed=1)
    x = np.array([[1 - 1e-9, 0, 0]] * 200)
    b = simulate_paths(model("stable"), BALL3, x, cfg)
    far = simulate_paths(model("stable"), BALL3, np.zeros((200, 3)), cfg)
    assert np.median(b.exit_time) < 10 * cfg.dt < np.median(far.exit_time)


def test_horizon():
    cfg = PathConfig(dt=1e-3, t_max=2e-3, seed=1)
    with pytest.raises(HorizonExceeded):
        simulate_paths(model("stable"), BALL3, np.zeros((50, 3)), cfg)
    b = simulate_paths(model("stable"), BALL3, np.zeros((50, 3)), cfg, on_horizon="flag")
    assert b.n_horizon > 0


def test_clip_ball():
    cfg = PathConfig(dt=1e-4, seed=1)
    b = simulate_paths(model("stable"), BALL3, np.zeros((2000, 3)), cfg, clip=(np.zeros(3), 0.5))
    # exit from the clipped ball B(0, 1/2): mean (1/4)^(1/2)/2
    se = b.exit_time.std(ddof=1) / math.sqrt(2000)
    assert abs(b.exit_time.mean() - 0.25) < max(3 * se, 0.0025)


def test_stable_exit_time_oracle():
    n = 20_000
    b = simulate_paths(model("stable"), BALL3, np.zeros((n, 3)), PathConfig(dt=1e-4, seed=5))
    se = b.exit_time.std(ddof=1) / math.sqrt(n)
    assert abs(b.exit_time.mean() - 0.5) < max(3 * se, 0.005)


@pytest.mark.parametrize("alpha,d", [(1.5, 2), (0.8, 3)])
def test_exit_time_other_indices(alpha, d):
    m = SubordinatorModel(BernsteinFamily("stable", alpha))
    dom = make_domain("ball", d)
    x = np.zeros(d)
    x[0] = 0.4
    n = 10_000
    b = simulate_paths(m, dom, np.repeat(x[None], n, axis=0), PathConfig(dt=1e-4, seed=6))
    exact = float(stable_ball_exit_time(alpha, d, 1.0, x)[0])
    se = b.exit_time.std(ddof=1) / math.sqrt(n)
    assert abs(b.exit_time.mean() - exact) < max(3 * se, 0.01 * exact)


def test_harmonic_measure_partition():
    cfg = PathConfig(dt=1e-3, seed=8)
    p, se = harmonic_measure(model("stable"), BALL3, np.zeros(3), Orthants(np.zeros(3), 3), cfg, 8000)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    # isotropy: congruent octants agree
    assert np.all(np.abs(p - 1 / 8) < 3 * se.max() * math.sqrt(2))


def test_harmonic_measure_shells_match_poisson_kernel():
    # frozen: mass of {1.1 <= |y| < 1.25} under the unit-ball Poisson kernel (alpha = 1, d = 3, x = 0)
    cfg = PathConfig(dt=1e-4, seed=9, refine_levels=16)
    p, se = harmonic_measure(model("stable"), BALL3, np.zeros(3), RadialShells(np.zeros(3), [0, 1.1, 1.25]),
                             cfg, 20_000)
    assert abs(p[1] - 0.136110225746521) < 3 * se[1]


@given(st.integers(0, 2**32), st.floats(1e-5, 1.0))
@settings(max_examples=20, deadline=None)
def test_increment_positivity_property(seed, dt):
    s = sample_increments(model("mixture"), dt, 200, seed=seed)
    assert np.all(s > 0) and np.all(np.isfinite(s))


@pytest.mark.slow
def test_small_jump_truncation():
    m = model("logpos")
    n = 100_000
    x = np.zeros((n, 3))
    est = []
    for eps in (1e-6, 5e-7):
        b = simulate_paths(m, BALL3, x, PathConfig(dt=1e-3, eps_jump=eps, seed=13))
        est.append((b.exit_time.mean(), b.exit_time.std(ddof=1) / math.sqrt(n)))
    assert abs(est[0][0] - est[1][0]) < est[0][1]
