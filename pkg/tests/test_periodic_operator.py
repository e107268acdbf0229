import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monoperiodic.periodic_operator import (GridMismatchError, PeriodicGridFunction,
                                            PeriodicOperator, apply_P, ivp_solve, mild_residual,
                                            periodic_resolvent, quadrature_weights)
from monoperiodic.problems import upwind_transport
from monoperiodic.semigroup import Generator, UnstableGeneratorError

TWO_PI = 2 * math.pi


def scalar_op(a=1.0, period=TWO_PI, nodes=64, quadrature="exponential"):
    return PeriodicOperator.build(Generator([[a]]), period, nodes, quadrature)


def test_resolvent_scalar():
    R = periodic_resolvent(Generator([[1.0]]), math.log(2))
    assert R[0, 0] == pytest.approx(2.0)


def test_resolvent_neutral_raises():
    with pytest.raises(UnstableGeneratorError):
        periodic_resolvent(Generator([[0.0]]), 1.0)
    with pytest.raises(UnstableGeneratorError):
        PeriodicOperator.build(Generator([[0.0]]), 1.0, 8)


def test_transport_resolvent_bound():
    R = periodic_resolvent(Generator(upwind_transport(64), shift=1.0), TWO_PI)
    bound = math.exp(TWO_PI) / (math.exp(TWO_PI) - 1)
    assert np.abs(R).sum(axis=1).max() <= bound + 1e-9


@pytest.mark.parametrize("rule", ["exponential", "trapezoid"])
def test_constant_forcing(rule):
    op = scalar_op(quadrature=rule)
    u = apply_P(op, PeriodicGridFunction.constant([1.0], TWO_PI, 64))
    tol = 1e-12 if rule == "exponential" else 1e-3
    assert np.max(np.abs(u.values - 1.0)) <= tol


def test_zero_forcing():
    op = scalar_op()
    assert np.all(apply_P(op, PeriodicGridFunction.constant([0.0], TWO_PI, 64)).values == 0.0)


@pytest.mark.parametrize("rule", ["exponential", "trapezoid"])
def test_sinusoid_second_order(rule):
    errs = []
    for m in (32, 64, 128, 256):
        op = scalar_op(nodes=m, quadrature=rule)
        u = apply_P(op, PeriodicGridFunction.from_function(np.sin, TWO_PI, m))
        exact = (np.sin(u.times) - np.cos(u.times)) / 2
        errs.append(np.max(np.abs(u.values[:, 0] - exact)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.6) & (ratios < 4.4)), ratios
    assert errs[-1] < 1e-4


def test_mild_residual():
    op = scalar_op()
    h = PeriodicGridFunction.from_function(lambda t: np.cos(3 * t), TWO_PI, 64)
    u = apply_P(op, h)
    assert mild_residual(op, u, h) <= 1e-10
    vals = u.values.copy()
    vals[10] += 1e-3
    assert mild_residual(op, PeriodicGridFunction(TWO_PI, vals), h) >= 0.5e-3
    one = PeriodicGridFunction.constant([1.0], TWO_PI, 64)
    assert mild_residual(op, one, one) <= 1e-12


def test_ivp():
    g = Generator([[1.0]])
    zero = PeriodicGridFunction.constant([0.0], 1.0, 10)
    traj = ivp_solve(g, [1.0], zero, 3.0)
    np.testing.assert_allclose(traj.values[:, 0], np.exp(-traj.times), atol=1e-14)
    one = PeriodicGridFunction.constant([1.0], 1.0, 10)
    assert ivp_solve(g, [0.0], one, 30.0).at(30.0)[0] == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        ivp_solve(g, [0.0], one, 0.05)


def test_ivp_closes_the_period():
    g = Generator(upwind_transport(16), shift=0.5)
    op = PeriodicOperator.build(g, TWO_PI, 64)
    rng = np.random.default_rng(1)
    h = PeriodicGridFunction(TWO_PI, rng.random((64, 16)))
    u = apply_P(op, h)
    traj = ivp_solve(g, u[0], h, TWO_PI)
    np.testing.assert_allclose(traj.at(TWO_PI), u[0], atol=1e-9)
    np.testing.assert_allclose(traj.values[:-1], u.values, atol=1e-9)


def test_grid_checks():
    op = scalar_op(nodes=64)
    with pytest.raises(GridMismatchError):
        apply_P(op, PeriodicGridFunction.constant([1.0], TWO_PI, 32))
    with pytest.raises(GridMismatchError):
        apply_P(op, PeriodicGridFunction.constant([1.0, 1.0], TWO_PI, 64))
    with pytest.raises(ValueError):
        quadrature_weights(Generator([[1.0]]), 0.1, "simpson")


def test_two_node_grid_warns():
    with pytest.warns(UserWarning):
        PeriodicOperator.build(Generator([[1.0]]), 1.0, 2)


def test_grid_function_basics():
    u = PeriodicGridFunction.from_function(lambda t: [t, -t], 4.0, 4)
    assert u.nodes == 4 and u.dimension == 2 and u.step == 1.0
    np.testing.assert_array_equal(u[5], [1.0, -1.0])
    np.testing.assert_allclose(u(1.5), [1.5, -1.5])
    np.testing.assert_allclose(u(5.5), [1.5, -1.5])
    np.testing.assert_allclose(u.delayed(1.0)[2], [1.0, -1.0])
    np.testing.assert_allclose(u.delayed(0.5)[2], [1.5, -1.5])
    assert u.norm() == 3.0
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    g = Generator(upwind_transport(8), shift=1.0)
    op = PeriodicOperator.build(g, TWO_PI, 32)
    h1 = PeriodicGridFunction(TWO_PI, rng.standard_normal((32, 8)))
    h2 = PeriodicGridFunction(TWO_PI, rng.standard_normal((32, 8)))
    lhs = apply_P(op, alpha * h1 + beta * h2)
    rhs = alpha * apply_P(op, h1) + beta * apply_P(op, h2)
    assert (lhs - rhs).norm() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["exponential", "trapezoid"]))
def test_positivity(seed, rule):
    rng = np.random.default_rng(seed)
    n = 6
    A = -rng.random((n, n))
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -A.sum(axis=1) + rng.random(n) + 0.1)
    op = PeriodicOperator.build(Generator(A), 3.0, 24, rule)
    h = PeriodicGridFunction(3.0, rng.random((24, n)))
    assert apply_P(op, h).values.min() >= -1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40))
def test_shift_equivariance(seed, k):
    rng = np.random.default_rng(seed)
    op = PeriodicOperator.build(Generator([[1.5]]), TWO_PI, 40)
    h = PeriodicGridFunction(TWO_PI, rng.standard_normal((40, 1)))
    assert (apply_P(op, h.roll(k)) - apply_P(op, h).roll(k)).norm() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 8.0))
def test_period_propagator_spectral_radius(seed, period):
    from monoperiodic.semigroup import spectral_radius
    rng = np.random.default_rng(seed)
    A = -rng.random((5, 5))
    np.fill_diagonal(A, -A.sum(axis=1) + rng.random(5) + 0.05)
    g = Generator(A)
    op = PeriodicOperator.build(g, period, 16)
    # the grid product S(dt)^m equals S(period) exactly in exact arithmetic
    assert spectral_radius(op.period_propagator) <= math.exp(g.nu1 * period) * (1 + 1e-9)
