"""Proximal operator checks: defining minimization property against a dense
grid, firm nonexpansiveness, and the scalar special cases."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coneshare.prox import (
    BallIndicator, L1Norm, PinnedValue, SeparableProx, ZeroFunction,
    project_ball, soft_threshold,
)
from oracles import prox_grid_oracle

finite = st.floats(min_value=-20.0, max_value=20.0,
                   allow_nan=False, allow_infinity=False)


def test_soft_threshold_known_values():
    x = np.array([3.0, -3.0, 0.5, -0.5, 0.0])
    assert np.allclose(soft_threshold(x, 1.0),
                       [2.0, -2.0, 0.0, 0.0, 0.0], atol=0.0)
    # zero threshold is exactly the identity
    assert np.array_equal(soft_threshold(x, 0.0), x)
    with pytest.raises(ValueError):
        soft_threshold(x, -0.1)


def test_project_ball_known_values():
    y = np.array([3.0, 4.0])
    assert np.allclose(project_ball(5.0, y), y)
    assert np.allclose(project_ball(1.0, y), [0.6, 0.8], atol=1e-15)
    assert np.allclose(project_ball(0.0, y), 0.0)
    with pytest.raises(ValueError):
        project_ball(-1.0, y)


@settings(max_examples=150, deadline=None)
@given(finite, st.floats(min_value=0.0, max_value=10.0, allow_nan=False))
def test_soft_threshold_matches_grid_minimizer(x, tau):
    got = float(soft_threshold(np.array([x]), tau)[0])
    ref = prox_grid_oracle(lambda u: tau * abs(u), x, 1.0,
                           lo=-25.0, hi=25.0)
    grid_step = 50.0 / 240000
    assert got == pytest.approx(ref, abs=2 * grid_step)


@settings(max_examples=100, deadline=None)
@given(finite, st.floats(min_value=0.05, max_value=10.0, allow_nan=False),
       st.floats(min_value=0.05, max_value=5.0, allow_nan=False))
def test_l1_prox_matches_grid_minimizer(x, tau, weight):
    op = L1Norm(weight)
    got = float(op.apply(np.array([x]), tau)[0])
    ref = prox_grid_oracle(lambda u: weight * np.abs(u), x, tau,
                           lo=-25.0, hi=25.0)
    grid_step = 50.0 / 240000
    assert got == pytest.approx(ref, abs=2 * grid_step)


@st.composite
def operator_and_points(draw, dim=4):
    choice = draw(st.integers(min_value=0, max_value=4))
    if choice == 0:
        op = ZeroFunction()
    elif choice == 1:
        op = L1Norm(draw(st.floats(min_value=0.0, max_value=5.0,
                                   allow_nan=False)))
    elif choice == 2:
        op = PinnedValue(draw(finite))
    elif choice == 3:
        op = BallIndicator(draw(st.floats(min_value=0.0, max_value=10.0,
                                          allow_nan=False)))
    else:
        op = SeparableProx([(L1Norm(1.0), 2), (BallIndicator(1.5), 2)])
    x = np.array(draw(st.lists(finite, min_size=dim, max_size=dim)))
    y = np.array(draw(st.lists(finite, min_size=dim, max_size=dim)))
    tau = draw(st.floats(min_value=1e-3, max_value=10.0, allow_nan=False))
    return op, x, y, tau


@settings(max_examples=250, deadline=None)
@given(operator_and_points())
def test_prox_firmly_nonexpansive(data):
    op, x, y, tau = data
    px = op.apply(x, tau)
    py = op.apply(y, tau)
    # ||Px - Py||^2 <= <Px - Py, x - y> characterizes prox maps
    lhs = float(np.sum((px - py) ** 2))
    rhs = float((px - py) @ (x - y))
    assert lhs <= rhs + 1e-10 * (1.0 + abs(rhs))


@settings(max_examples=100, deadline=None)
@given(operator_and_points())
def test_prox_never_increases_envelope_objective(data):
    op, x, y, tau = data
    px = op.apply(x, tau)

    def envelope(u):
        return op.value(u) + float(np.sum((u - x) ** 2)) / (2.0 * tau)

    if isinstance(op, PinnedValue):
        y = np.full_like(y, op.pin)  # only feasible competitor
    if isinstance(op, BallIndicator):
        y = project_ball(op.radius, y)
    if isinstance(op, SeparableProx):
        y[2:] = project_ball(1.5, y[2:])
    assert envelope(px) <= envelope(y) + 1e-9 * (1.0 + abs(envelope(y)))


def test_pinned_value_is_constant():
    op = PinnedValue(2.5)
    assert np.allclose(op.apply(np.array([-9.0, 4.0]), 0.3), 2.5)
    assert op.value(np.array([100.0])) == 0.0


def test_separable_prox_blocks_and_validation():
    op = SeparableProx([(L1Norm(2.0), 2), (ZeroFunction(), 1)])
    x = np.array([3.0, -0.5, 7.0])
    out = op.apply(x, 0.5)
    assert np.allclose(out, [2.0, 0.0, 7.0])
    assert op.value(x) == pytest.approx(2.0 * 3.5)
    with pytest.raises(ValueError):
        op.apply(np.zeros(4), 0.5)
    with pytest.raises(ValueError):
        SeparableProx([(ZeroFunction(), 0)])
    with pytest.raises(ValueError):
        L1Norm(-1.0)
