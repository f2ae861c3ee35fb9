"""Vector plumbing and the trace recursion."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from implicit_td.core import (
    DimensionMismatchError,
    DiscountSpec,
    Transition,
    axpy,
    dot,
    update_trace,
)


def test_discount_spec_bounds():
    d = DiscountSpec(gamma=0.9, lam=0.5)
    assert d.trace_decay == pytest.approx(0.45)
    with pytest.raises(ValueError):
        DiscountSpec(gamma=1.0, lam=0.5)
    with pytest.raises(ValueError):
        DiscountSpec(gamma=0.0, lam=0.5)
    with pytest.raises(ValueError):
        DiscountSpec(gamma=0.9, lam=1.5)
    # lam spans the closed interval
    DiscountSpec(gamma=0.9, lam=0.0)
    DiscountSpec(gamma=0.9, lam=1.0)


def test_update_trace_zero_trace_passthrough():
    d = DiscountSpec(gamma=0.9, lam=0.5)
    out = update_trace(np.zeros(2), np.array([1.0, 2.0]), d)
    assert np.array_equal(out, [1.0, 2.0])


def test_update_trace_lambda_zero_kills_history():
    d = DiscountSpec(gamma=0.9, lam=0.0)
    out = update_trace(np.array([7.0]), np.array([3.0]), d)
    assert np.array_equal(out, [3.0])


def test_update_trace_hand_value():
    # gamma*lam = 0.45 applied to the old trace, feature added on top
    d = DiscountSpec(gamma=0.9, lam=0.5)
    out = update_trace(np.array([1.0, 0.0]), np.array([0.0, 1.0]), d)
    assert out == pytest.approx([0.45, 1.0])


def test_update_trace_length_mismatch():
    d = DiscountSpec(gamma=0.9, lam=0.5)
    with pytest.raises(DimensionMismatchError):
        update_trace(np.zeros(2), np.zeros(3), d)


@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=6),
    st.lists(st.floats(-10, 10), min_size=1, max_size=6),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_update_trace_linear(e1, e2, a, b):
    n = min(len(e1), len(e2))
    e1, e2 = np.array(e1[:n]), np.array(e2[:n])
    d = DiscountSpec(gamma=0.9, lam=0.5)
    lhs = update_trace(a * e1 + b * e2, a * e2 + b * e1, d)
    rhs = a * update_trace(e1, e2, d) + b * update_trace(e2, e1, d)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_dot_examples():
    assert dot(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert dot(np.array([2.0]), np.array([3.0])) == 6.0
    assert dot(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0])) == 32.0
    with pytest.raises(DimensionMismatchError):
        dot(np.zeros(2), np.zeros(3))


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8))
def test_dot_norm_nonnegative(v):
    arr = np.array(v)
    assert dot(arr, arr) >= 0.0


def test_dot_zero_vector():
    assert dot(np.zeros(3), np.zeros(3)) == 0.0


def test_axpy_examples():
    y = np.array([0.0, 3.0])
    assert np.array_equal(axpy(0.0, np.array([9.0, 9.0]), y), y)
    assert np.array_equal(axpy(1.0, np.zeros(1), np.array([5.0])), [5.0])
    assert np.array_equal(axpy(2.0, np.array([1.0, 1.0]), y), [2.0, 5.0])
    with pytest.raises(DimensionMismatchError):
        axpy(1.0, np.zeros(2), np.zeros(3))


def test_transition_validation():
    tr = Transition(phi_t=np.ones(2), reward=1.0, phi_next=np.zeros(2))
    assert tr.k == 2
    assert not tr.terminal
    with pytest.raises(DimensionMismatchError):
        Transition(phi_t=np.ones(2), reward=0.0, phi_next=np.zeros(3))
    with pytest.raises(ValueError):
        Transition(phi_t=np.ones(1), reward=float("nan"), phi_next=np.ones(1))
