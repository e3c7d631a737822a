import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaydyne.estimators import (DyneRecord, EpsilonEndpoint, UndefinedEstimate, accumulate,
                                  blend_angles, combine_c, epsilon_estimate, finalize,
                                  variable_epsilon, wrap_angle)

finite = st.floats(-5, 5, allow_nan=False)


def test_accumulate_single_step():
    r = accumulate(DyneRecord(), 0.3, 0.0, 0.01)
    assert r.A == pytest.approx(0.3)
    assert r.B == pytest.approx(-0.01)
    assert r.v == pytest.approx(0.01)


def test_rotation_pattern_cancels_b():
    dv = 1 / 1024
    r = DyneRecord()
    for k in range(4 * 50):
        r = accumulate(r, 0.0, k * math.pi / 2, dv)
        assert abs(r.B) <= 2 * dv + 1e-15


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=50))
@settings(max_examples=300, deadline=None)
def test_b_bounded_by_v(steps):
    r = DyneRecord()
    dv = 1 / 64
    for i_dv, phi in steps:
        r = accumulate(r, i_dv * dv, phi, dv)
        assert abs(r.B) <= r.v + 64 * 1e-16


def test_combine_c_examples():
    assert combine_c(DyneRecord(1, 0, 1)) == 1
    assert combine_c(DyneRecord(2, 0.5, 1)) == 3
    assert combine_c(DyneRecord(1j, -0.2, 0.5)) == pytest.approx(0.7j)


def test_epsilon_estimate_examples():
    r = DyneRecord(cmath.exp(0.2j), 0.3 * cmath.exp(0.6j), 1.0)
    assert epsilon_estimate(r, 1.0) == pytest.approx(0.2)
    assert epsilon_estimate(r, 0.0) == pytest.approx(cmath.phase(combine_c(r)))
    assert blend_angles(0.2, 0.4, 0.5) == pytest.approx(0.3)
    with pytest.raises(UndefinedEstimate):
        epsilon_estimate(DyneRecord(), 0.5)


def test_blend_unwraps_across_branch_cut():
    # arg A just below pi, arg C just above -pi: the blend stays near the cut
    out = blend_angles(math.pi - 0.1, -math.pi + 0.1, 0.5)
    assert abs(wrap_angle(out)) == pytest.approx(math.pi)


def test_variable_epsilon_examples():
    assert variable_epsilon(DyneRecord(1, 0, 0.5)) == pytest.approx(0.5)
    assert variable_epsilon(DyneRecord(1, 0.5, 0.5)) == 0.0
    assert variable_epsilon(DyneRecord(1, 0.1, 0.999)) == 1.0
    with pytest.raises(EpsilonEndpoint):
        variable_epsilon(DyneRecord(1, 0, 1.0))
    with pytest.raises(EpsilonEndpoint):
        variable_epsilon(DyneRecord(0, 0.1, 0.5))


def test_finalize_examples():
    e = finalize(DyneRecord(cmath.exp(0.1j), 0, 1.0), None)
    assert e.arg_a == pytest.approx(0.1) and e.arg_c == pytest.approx(0.1)
    e = finalize(DyneRecord(2.0, -0.3, 1.0), 7.0)
    assert e.arg_c == 0.0
    assert -math.pi < e.feedback_final <= math.pi
    e = finalize(DyneRecord(0j, 0.3, 1.0), None)
    assert e.arg_a is None and e.arg_c is None and e.invalid_count == 2


@given(st.floats(-100, 100, allow_nan=False))
def test_wrap_angle_range(x):
    w = wrap_angle(x)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)


@given(finite, finite, finite, finite, st.floats(0, 1))
@settings(max_examples=1000, deadline=None)
def test_c_identity_ulps(ar, ai, br, bi, v):
    A, B = complex(ar, ai), complex(br, bi)
    got = combine_c(DyneRecord(A, B, v))
    naive = A * v + B * A.conjugate()
    scale = abs(A) * (v + abs(B)) + 1e-300
    assert abs(got - naive) <= 4 * np.spacing(scale)
