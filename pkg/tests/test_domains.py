import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit.domains import make_domain
from sbmkit.errors import ParameterError

KINDS = ["ball", "box", "lshape", "slitball", "twoballs"]


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("d", [2, 3])
def test_fatness_witness(kind, d):
    dom = make_domain(kind, d)
    Q = dom.boundary_point()
    r_list = [dom.R_char * 2.0**-k for k in range(4)]
    ok, worst = dom.verify_fatness([Q], r_list, n_samples=1000)
    assert ok, (kind, d, worst)
    assert 0 < dom.kappa <= 0.5


@pytest.mark.parametrize("kind", KINDS)
def test_interior_point_and_distance(kind):
    dom = make_domain(kind, 3)
    x = dom.interior_point()
    assert dom.contains(x)
    assert dom.distance_to_boundary(x)[0] > 0


def test_membership_exact():
    b = make_domain("ball", 2)
    assert not b.contains([1.0, 0.0])
    assert b.contains([np.nextafter(1.0, 0), 0.0])
    s = make_domain("slitball", 2)
    assert not s.contains([0.5, 0.0])
    assert s.contains([-0.5, 0.0])
    assert s.contains([0.5, 1e-300])
    L = make_domain("lshape", 3)
    assert not L.contains([0.0, 0.0, 0.0])
    assert L.contains([-1e-12, 0.5, 0.0])
    tb = make_domain("twoballs", 2)
    assert not tb.contains([0.0, 0.0])


@given(st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_distance_consistent_with_membership(x):
    for kind in KINDS:
        dom = make_domain(kind, 3)
        dist = float(dom.distance_to_boundary(np.array(x))[0])
        if dist > 1e-12:
            assert dom.contains(x)
        if dom.contains(x) and kind != "slitball":
            assert dist >= 0


def test_ball_witness_on_normal():
    dom = make_domain("ball", 3)
    A = dom.witness(np.array([1.0, 0, 0]), 0.5)
    assert np.allclose(A, [0.75, 0, 0])


def test_bad_kind():
    with pytest.raises(ParameterError):
        make_domain("torus", 3)
