import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monoperiodic.monotone_solver import (DelayedProblem, HypothesisConstants, HypothesisError,
                                          InvalidBracketError, RhsError, Status, apply_Q,
                                          check_H1, check_H3_H4_H5, eval_F_shifted,
                                          extremality_check, iterate, uniqueness_certificate,
                                          verify_lower_solution, verify_upper_solution)
from monoperiodic.periodic_operator import PeriodicGridFunction
from monoperiodic.problems import build_scalar, build_scalar_bistable, build_scalar_delay

from conftest import half_delay_problem

TWO_PI = 2 * math.pi


def const(value, nodes=128, period=TWO_PI):
    return PeriodicGridFunction.constant([value], period, nodes)


def raw_problem(rhs, lower=-1.0, upper=1.0, a=1.0, delay=0.5, nodes=64, constants=None):
    return DelayedProblem([[a]], rhs, TWO_PI, delay, const(lower, nodes), const(upper, nodes),
                          constants or HypothesisConstants())


def test_eval_F_shifted_zero():
    p = raw_problem(lambda t, x, y: 0.0 * x)
    assert eval_F_shifted(p, const(0.5, 64)).norm() == 0.0


def test_apply_Q_constant_fixed_point(half_delay):
    op = half_delay.operator()
    assert (apply_Q(half_delay, op, const(2.0)) - 2.0).norm() <= 1e-10


def test_apply_Q_zero_rhs():
    p = raw_problem(lambda t, x, y: 0.0 * x)
    rng = np.random.default_rng(0)
    u = PeriodicGridFunction(TWO_PI, rng.uniform(-1, 1, (64, 1)))
    assert apply_Q(p, p.operator(), u).norm() <= 1e-14


def test_apply_Q_warns_outside_interval(half_delay):
    with pytest.warns(UserWarning):
        apply_Q(half_delay, half_delay.operator(), const(5.0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_apply_Q_is_monotone(seed):
    # F + C u nondecreasing in both arguments for C = 3
    p = raw_problem(lambda t, x, y: -3 * x + np.tanh(y) + np.sin(t), -2.0, 2.0, a=1.0,
                    constants=HypothesisConstants(C=3.0))
    op = p.operator()
    rng = np.random.default_rng(seed)
    u1 = rng.uniform(-2, 2, (64, 1))
    u2 = u1 + rng.uniform(0, 1, (64, 1)) * (2 - u1)
    q1 = apply_Q(p, op, PeriodicGridFunction(TWO_PI, u1))
    q2 = apply_Q(p, op, PeriodicGridFunction(TWO_PI, u2))
    assert np.min(q2.values - q1.values) >= -1e-9


def test_lower_upper_verification(half_delay):
    assert verify_upper_solution(half_delay, const(3.0)).ok
    assert verify_upper_solution(half_delay, const(3.0)).worst_violation == pytest.approx(0.5)
    assert not verify_lower_solution(half_delay, const(3.0)).ok
    assert verify_lower_solution(half_delay, const(0.0)).ok


def test_check_H1():
    ok = raw_problem(lambda t, x, y: 1 + 0.5 * y + 0 * x)
    assert check_H1(ok).ok
    bad = raw_problem(lambda t, x, y: 1 - y + 0 * x, upper=1.0, lower=-1.0)
    res = check_H1(bad)
    assert not res.ok and res.witness["y2"][0] > res.witness["y1"][0]
    lin = raw_problem(lambda t, x, y: -3 * x)
    assert check_H1(lin, C=3.0).ok
    assert not check_H1(lin, C=2.0).ok


def test_check_H3_H4_H5_linear():
    p = raw_problem(lambda t, x, y: -2 * x + 0.5 * y + np.sin(t),
                    constants=HypothesisConstants(C1=0.1, C2=2.0, C3=0.0, L1=0.0, L2=0.5))
    rep = check_H3_H4_H5(p)
    assert rep.ok and rep.h3.skipped and rep.derived_C == 2.0


def test_check_H5_square():
    for L1, expected in ((2.0, True), (1.0, False)):
        p = raw_problem(lambda t, x, y: x ** 2 + 0 * y, 0.0, 1.0, a=3.0,
                        constants=HypothesisConstants(C1=0.1, C2=0.0, C3=0.0, L1=L1, L2=0.0))
        assert check_H3_H4_H5(p).h5.ok is expected


def test_check_H3_refuted_for_nonconstant_pairs():
    p = raw_problem(lambda t, x, y: 0.0 * x + 0.5,
                    constants=HypothesisConstants(C1=0.1, C2=1.0, C3=0.5, L1=0.0, L2=0.0))
    rep = check_H3_H4_H5(p)
    assert not rep.h3.ok and rep.h3.witness["violation"] > 0
    assert rep.derived_C is None


def test_derived_C():
    assert HypothesisConstants(C1=0.1, C2=1.0, C3=0.5).derived_C() == pytest.approx(6.0)
    with pytest.raises(HypothesisError):
        HypothesisConstants(C1=0.0, C2=1.0, C3=0.5).derived_C()
    with pytest.raises(HypothesisError):
        HypothesisConstants(C=-1.0)
    with pytest.raises(HypothesisError):
        check_H3_H4_H5(raw_problem(lambda t, x, y: 0 * x))


def test_certificate_scalar(scalar_benchmark):
    cert = uniqueness_certificate(scalar_benchmark, scalar_benchmark.operator())
    C_S = 1 / (1 - math.exp(-4 * math.pi))
    assert cert.kappa == pytest.approx(0.05 * C_S * TWO_PI, rel=1e-4)
    assert cert.certified and cert.M_S == pytest.approx(1.0)


def test_certificate_zero_constants():
    p = raw_problem(lambda t, x, y: np.sin(t) + 0 * x,
                    constants=HypothesisConstants(C1=0.1, C2=0.0, C3=0.0, L1=0.0, L2=0.0))
    cert = uniqueness_certificate(p, p.operator())
    assert cert.kappa == 0.0 and cert.certified
    rep = iterate(p, p.operator())
    assert rep.status is Status.UNIQUE_SOLUTION and rep.iterations <= 2


def test_certificate_long_period_not_certified():
    p = build_scalar(2.0, lambda t, x, y: 0.5 * y + np.sin(t / 10), -2.0, 2.0, 1.0, 20 * TWO_PI, 512,
                     HypothesisConstants(C1=0.1, C2=0.0, C3=0.0, L1=0.0, L2=0.5))
    op = p.operator()
    assert not uniqueness_certificate(p, op).certified
    assert iterate(p, op).converged


def test_iterate_trivial():
    p = raw_problem(lambda t, x, y: 0 * x, 0.0, 0.0)
    rep = iterate(p, p.operator())
    assert rep.status is Status.UNIQUE_SOLUTION and rep.iterations == 1
    assert rep.upper.norm() == 0.0


def test_iterate_constant_fixed_point(half_delay):
    rep = iterate(half_delay, half_delay.operator())
    assert rep.status is Status.UNIQUE_SOLUTION
    assert (rep.lower - 2.0).norm() <= 1e-7 and (rep.upper - 2.0).norm() <= 1e-7


def test_iterate_rejects_bad_bracket(half_delay):
    p = half_delay_problem(lower=0.0, upper=3.0)
    bad = DelayedProblem(p.generator, p.rhs, p.period, p.delay, const(2.5), p.upper, p.constants)
    with pytest.raises(InvalidBracketError, match="lower"):
        iterate(bad, bad.operator())
    with pytest.raises(InvalidBracketError):
        DelayedProblem(p.generator, p.rhs, p.period, p.delay, p.upper, p.lower, p.constants)


def test_monotonicity_violation_detected():
    # F decreasing in y with C = 0: Q is not order preserving
    p = raw_problem(lambda t, x, y: -1.5 * y + 0 * x, -1.0, 1.0, a=1.0, delay=math.pi)
    rep = iterate(p, p.operator())
    assert rep.status is Status.MONOTONICITY_VIOLATED
    assert rep.violation["value"] < 0


def test_max_iter(scalar_benchmark):
    rep = iterate(scalar_benchmark, scalar_benchmark.operator(), max_iter=3)
    assert rep.status is Status.MAX_ITER_REACHED and rep.iterations == 3


def test_bistable_extremal_pair():
    p = build_scalar_bistable()
    op = p.operator()
    rep = iterate(p, op)
    assert rep.status is Status.EXTREMAL_PAIR
    assert (rep.lower + 1.0).norm() <= 1e-6 and (rep.upper - 1.0).norm() <= 1e-6
    assert extremality_check(p, op, rep, probes=4)


def test_extremality_unique(half_delay):
    op = half_delay.operator()
    rep = iterate(half_delay, op)
    assert extremality_check(half_delay, op, rep, probes=3)


def test_rhs_errors():
    p = raw_problem(lambda t, x, y: np.zeros((3, 3)))
    with pytest.raises(RhsError):
        p.evaluate([0.0], np.zeros((1, 1)), np.zeros((1, 1)))
    q = raw_problem(lambda t, x, y: np.log(x - 2.0))
    with pytest.raises(RhsError), np.errstate(invalid="ignore"):
        q.evaluate([0.0], np.zeros((1, 1)), np.zeros((1, 1)))


def test_non_vectorized_rhs():
    p = DelayedProblem([[2.0]], lambda t, x, y: 0.5 * y + math.sin(t), TWO_PI, math.pi / 2,
                       const(-1.0, 64), const(1.0, 64), vectorized=False)
    ref = build_scalar_delay(nodes=64)
    a = iterate(p, p.operator())
    b = iterate(ref, ref.operator())
    assert (a.upper - b.upper).norm() <= 1e-9


def test_report_summary(scalar_benchmark):
    rep = iterate(scalar_benchmark, scalar_benchmark.operator())
    s = rep.summary()
    assert s["status"] == "unique_solution"
    assert s["mild_residuals"]["lower"] <= 1e-10
    assert len(rep.contraction_ratios) == rep.iterations
