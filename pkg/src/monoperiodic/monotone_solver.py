"""Monotone iteration for periodic solutions of ``u' + A u = F(t, u(t), u(t - tau))``.

The problem is rewritten as ``u' + (A + C I) u = F(t, u, u(. - tau)) + C u``
and the map ``Q = P o F_C`` is iterated from a lower solution ``v0`` and an
upper solution ``w0``.  When ``F + C u`` is order preserving on ``[v0, w0]``
the two sequences are monotone and squeeze the minimal and maximal periodic
solutions.

Right-hand sides are called as ``rhs(t, x, y)`` with ``t`` of shape
``(k, 1)`` and ``x``, ``y`` of shape ``(k, n)``; they must return ``(k, n)``
(a scalar constant is broadcast).  Pass ``vectorized=False`` to get one call
per node with ``t`` a float and ``x``, ``y`` of shape ``(n,)``.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ordered_space import NORMAL_CONSTANT
from .periodic_operator import PeriodicGridFunction, PeriodicOperator, apply_P, mild_residual
from .semigroup import Generator, finalize_shift, sup_norm_bound

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DEFAULT_VERIFY_TOL = 1e-8
# gap ratio above which a converged pair is taken as stalled (distinct extremal solutions)
_STALL = 0.99


class RhsError(ValueError):
    """The right-hand side returned the wrong shape or non-finite values."""


class InvalidBracketError(ValueError):
    """``v0``/``w0`` are not ordered, or not lower/upper solutions."""


class HypothesisError(ValueError):
    """Hypothesis constants are missing or inconsistent."""


class Status(str, enum.Enum):
    EXTREMAL_PAIR = "extremal_pair"
    UNIQUE_SOLUTION = "unique_solution"
    MONOTONICITY_VIOLATED = "monotonicity_violated"
    MAX_ITER_REACHED = "max_iter_reached"


@dataclass(frozen=True)
class HypothesisConstants:
    """Constants of the one-sided bounds on ``F``.

    ``C`` is the constant of the one-sided Lipschitz bound (H1).  When either
    of ``C2``/``C3`` is given, the shift is instead derived as
    ``C2 + C3 / C1``.
    """

    C: float = 0.0
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    L1: float | None = None
    L2: float | None = None
    N: float = NORMAL_CONSTANT

    def __post_init__(self):
        for name in ("C", "C1", "C2", "C3", "L1", "L2", "N"):
            val = getattr(self, name)
            if val is not None and not (val >= 0 and math.isfinite(val)):
                raise HypothesisError(f"constant {name} must be a finite nonnegative number, got {val}")

    @property
    def quasi_monotone(self) -> bool:
        return self.C2 is not None or self.C3 is not None

    def derived_C(self) -> float:
        C2 = self.C2 or 0.0
        C3 = self.C3 or 0.0
        if C3 == 0.0:
            return C2
        if not self.C1:
            raise HypothesisError("derived C undefined: C1 = 0 with C3 > 0")
        return C2 + C3 / self.C1

    def shift_candidate(self) -> float:
        return self.derived_C() if self.quasi_monotone else self.C


@dataclass(frozen=True, eq=False)
class DelayedProblem:
    """``u' + A u = F(t, u(t), u(t - delay))`` with ``period``-periodic ``F``.

    ``delay`` is stored modulo ``period``; that is harmless because only
    periodic candidates are ever plugged in.
    """

    generator: Generator
    rhs: Callable
    period: float
    delay: float
    lower: PeriodicGridFunction
    upper: PeriodicGridFunction
    constants: HypothesisConstants = field(default_factory=HypothesisConstants)
    vectorized: bool = True
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.generator
        if not isinstance(g, Generator):
            g = Generator(np.asarray(g, dtype=float))
            object.__setattr__(self, "generator", g)
        if self.delay < 0:
            raise ValueError(f"delay must be nonnegative, got {self.delay}")
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "delay", float(self.delay) % self.period)
        v, w = self.lower, self.upper
        for f, label in ((v, "lower"), (w, "upper")):
            if f.dimension != g.dimension or not math.isclose(f.period, self.period, rel_tol=1e-12):
                raise ValueError(f"{label} function does not match the problem's period/dimension")
        if not v.same_grid(w):
            raise ValueError("lower and upper functions live on different grids")
        gap = float(np.min(w.values - v.values))
        if gap < 0:
            raise InvalidBracketError(f"lower function exceeds upper function by {-gap:.3g}")

    @property
    def dimension(self) -> int:
        return self.generator.dimension

    @property
    def nodes(self) -> int:
        return self.lower.nodes

    @property
    def times(self) -> np.ndarray:
        return self.lower.times

    def evaluate(self, t, x, y) -> np.ndarray:
        """Batched ``F``: ``t`` shape ``(k,)``, ``x``, ``y`` shape ``(k, n)``."""
        t = np.asarray(t, dtype=float).reshape(-1)
        k, n = x.shape
        if self.vectorized:
            out = np.asarray(self.rhs(t[:, None], x, y), dtype=float)
            if out.ndim == 0:
                out = np.full((k, n), float(out))
            elif n == 1 and out.shape == (k,):
                out = out[:, None]
        else:
            out = np.array([np.atleast_1d(self.rhs(float(t[i]), x[i], y[i])) for i in range(k)],
                           dtype=float)
        if out.shape != (k, n):
            raise RhsError(f"right-hand side returned shape {out.shape}, expected {(k, n)}")
        if not np.all(np.isfinite(out)):
            raise RhsError("right-hand side returned non-finite values")
        return out

    def shifted_generator(self, margin: float | None = None) -> Generator:
        return finalize_shift(self.generator.matrix, self.constants.shift_candidate(), margin)

    def operator(self, quadrature: str = "exponential", margin: float | None = None) -> PeriodicOperator:
        return PeriodicOperator.build(self.shifted_generator(margin), self.period, self.nodes, quadrature)


def eval_F_shifted(p: DelayedProblem, u: PeriodicGridFunction, shift: float | None = None
                   ) -> PeriodicGridFunction:
    """Node values of ``F(t_j, u(t_j), u(t_j - delay)) + C u(t_j)``."""
    if not u.same_grid(p.lower):
        raise ValueError("grid function is not on the problem's grid")
    C = p.constants.shift_candidate() if shift is None else shift
    out = p.evaluate(u.times, u.values, u.delayed(p.delay))
    if C:
        out = out + C * u.values
    return PeriodicGridFunction(p.period, out)


def _slack(p: DelayedProblem) -> float:
    return 1e-9 * (1.0 + p.upper.norm())


def apply_Q(p: DelayedProblem, op: PeriodicOperator, u: PeriodicGridFunction,
            check_interval: bool = True) -> PeriodicGridFunction:
    """``Q u = P(F(., u, u(. - delay)) + C u)`` with ``C`` the operator's shift."""
    if check_interval:
        s = _slack(p)
        if (np.min(u.values - p.lower.values) < -s or np.min(p.upper.values - u.values) < -s):
            warnings.warn("apply_Q called outside the order interval [lower, upper]", stacklevel=2)
    return apply_P(op, eval_F_shifted(p, u, op.generator.shift))


# -- lower / upper solutions ---------------------------------------------------

@dataclass(frozen=True)
class SolutionCheck:
    ok: bool
    worst_violation: float
    node: int
    component: int


def _solution_slack(p: DelayedProblem, v: PeriodicGridFunction, sign: float) -> np.ndarray:
    if not v.same_grid(p.lower):
        raise ValueError("candidate is not on the problem's grid")
    dv = (np.roll(v.values, -1, axis=0) - np.roll(v.values, 1, axis=0)) / (2.0 * v.step)
    lhs = dv + v.values @ p.generator.matrix.T
    rhs = p.evaluate(v.times, v.values, v.delayed(p.delay))
    return sign * (rhs - lhs)


def _solution_check(slack: np.ndarray, tol: float) -> SolutionCheck:
    j, i = np.unravel_index(int(np.argmin(slack)), slack.shape)
    worst = float(slack[j, i])
    return SolutionCheck(worst >= -tol, worst, int(j), int(i))


def verify_lower_solution(p: DelayedProblem, v: PeriodicGridFunction,
                          tol: float = DEFAULT_VERIFY_TOL) -> SolutionCheck:
    """Check ``v' + A v <= F(t, v, v(t - delay))`` at every node.

    ``v'`` is the periodic central difference; ``worst_violation`` is the
    smallest slack ``F - v' - A v`` found.
    """
    return _solution_check(_solution_slack(p, v, 1.0), tol)


def verify_upper_solution(p: DelayedProblem, w: PeriodicGridFunction,
                          tol: float = DEFAULT_VERIFY_TOL) -> SolutionCheck:
    """Check ``w' + A w >= F(t, w, w(t - delay))`` at every node."""
    return _solution_check(_solution_slack(p, w, -1.0), tol)


# -- sampled hypothesis refuters -----------------------------------------------

@dataclass(frozen=True)
class HypothesisCheck:
    """Outcome of a sampled check.

    ``ok`` only means no counterexample was found among ``samples`` draws;
    a ``witness`` is a genuine counterexample.
    """

    name: str
    ok: bool
    samples: int
    witness: dict | None = None
    skipped: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "samples": self.samples,
                "witness": self.witness, "skipped": self.skipped, "note": self.note}


def _ordered_samples(p: DelayedProblem, samples: int, rng: np.random.Generator):
    """Random nodes and ordered pairs ``x1 <= x2``, ``y1 <= y2`` in the local boxes.

    A quarter of the draws move only ``x``, a quarter only ``y``, a quarter a
    single component; the rest move everything.
    """
    m, n = p.nodes, p.dimension
    j = rng.integers(0, m, size=samples)
    xlo, xhi = p.lower.values[j], p.upper.values[j]
    ylo, yhi = p.lower.delayed(p.delay)[j], p.upper.delayed(p.delay)[j]

    def box(lo, hi):
        a = lo + rng.random((samples, n)) * (hi - lo)
        b = lo + rng.random((samples, n)) * (hi - lo)
        return np.minimum(a, b), np.maximum(a, b)

    x1, x2 = box(xlo, xhi)
    y1, y2 = box(ylo, yhi)
    mode = rng.integers(0, 4, size=samples)
    y2[mode == 1] = y1[mode == 1]
    x2[mode == 2] = x1[mode == 2]
    single = np.flatnonzero(mode == 3)
    if single.size:
        comp = rng.integers(0, 2 * n, size=single.size)
        keep_x = np.ones((single.size, n), dtype=bool)
        keep_y = np.ones((single.size, n), dtype=bool)
        rows = np.arange(single.size)
        in_x = comp < n
        keep_x[rows[in_x], comp[in_x]] = False
        keep_y[rows[~in_x], comp[~in_x] - n] = False
        x2[single] = np.where(keep_x, x1[single], x2[single])
        y2[single] = np.where(keep_y, y1[single], y2[single])
    t = p.times[j]
    return j, t, x1, x2, y1, y2


def _first_witness(viol, j, t, x1, x2, y1, y2, excess):
    bad = np.flatnonzero(np.any(viol, axis=1))
    if bad.size == 0:
        return None
    s = int(bad[0])
    comp = int(np.argmax(excess[s]))
    return {"node": int(j[s]), "t": float(t[s]), "component": comp,
            "x1": x1[s].tolist(), "x2": x2[s].tolist(), "y1": y1[s].tolist(), "y2": y2[s].tolist(),
            "violation": float(excess[s, comp])}


def _roundoff(F1, F2):
    return 1e-12 * (1.0 + np.abs(F1) + np.abs(F2))


def check_H1(p: DelayedProblem, samples: int = 2000, rng_seed: int = 0,
             C: float | None = None) -> HypothesisCheck:
    """Sampled refutation of ``F(t,x2,y2) - F(t,x1,y1) >= -C (x2 - x1)``."""
    C = p.constants.C if C is None else C
    rng = np.random.default_rng(rng_seed)
    j, t, x1, x2, y1, y2 = _ordered_samples(p, samples, rng)
    F1, F2 = p.evaluate(t, x1, y1), p.evaluate(t, x2, y2)
    lhs = F2 - F1 + C * (x2 - x1)
    excess = -lhs
    viol = excess > _roundoff(F1, F2)
    witness = _first_witness(viol, j, t, x1, x2, y1, y2, excess)
    return HypothesisCheck("H1", witness is None, samples, witness)


@dataclass(frozen=True)
class QuasiMonotoneReport:
    h3: HypothesisCheck
    h4: HypothesisCheck
    h5: HypothesisCheck
    derived_C: float | None

    @property
    def ok(self) -> bool:
        return self.h3.ok and self.h4.ok and self.h5.ok

    def to_dict(self) -> dict:
        return {"H3": self.h3.to_dict(), "H4": self.h4.to_dict(), "H5": self.h5.to_dict(),
                "derived_C": self.derived_C, "ok": self.ok}


def _check_H3(p: DelayedProblem, pairs: int, rng: np.random.Generator) -> HypothesisCheck:
    c = p.constants
    if not c.C3:
        return HypothesisCheck("H3", True, 0, skipped=True,
                               note="C3 = 0: the delayed comparison is not needed for the shift")
    v, w = p.lower, p.upper
    m, n = v.values.shape
    for s in range(pairs):
        if s % 2 == 0:  # constant fractions of the interval
            a, b = rng.random(), rng.random()
        else:
            a, b = rng.random((m, n)), rng.random((m, n))
        u1 = v.values + a * (w.values - v.values)
        u2 = u1 + b * (w.values - u1)
        d = PeriodicGridFunction(p.period, u2 - u1)
        lhs = d.values - c.C1 * d.delayed(p.delay)
        k = int(np.argmin(lhs))
        worst = float(lhs.flat[k])
        if worst < -1e-12 * (1.0 + w.norm()):
            node, comp = np.unravel_index(k, lhs.shape)
            return HypothesisCheck("H3", False, s + 1, {
                "pair": s, "node": int(node), "t": float(v.times[node]), "component": int(comp),
                "difference": float(d.values[node, comp]),
                "delayed_difference": float(d.delayed(p.delay)[node, comp]),
                "violation": -worst})
    return HypothesisCheck("H3", True, pairs)


def check_H3_H4_H5(p: DelayedProblem, samples: int = 2000, rng_seed: int = 0) -> QuasiMonotoneReport:
    """Sampled refutation of the quasi-monotone bounds and the Lipschitz bound.

    (H4) ``F(t,x2,y2) - F(t,x1,y1) >= -C2 (x2-x1) - C3 (y2-y1)``,
    (H5) ``F(t,x2,y2) - F(t,x1,y1) <= L1 (x2-x1) + L2 (y2-y1)``,
    (H3) ``u2(t) - u1(t) >= C1 (u2(t-tau) - u1(t-tau))`` over sampled ordered
    pairs of grid functions in ``[v0, w0]``.
    """
    c = p.constants
    missing = [k for k in ("C2", "C3", "L1", "L2") if getattr(c, k) is None]
    if missing:
        raise HypothesisError(f"missing constants: {', '.join(missing)}")
    derived = c.derived_C()  # raises for C1 = 0 with C3 > 0
    rng = np.random.default_rng(rng_seed)
    j, t, x1, x2, y1, y2 = _ordered_samples(p, samples, rng)
    F1, F2 = p.evaluate(t, x1, y1), p.evaluate(t, x2, y2)
    dF, dx, dy = F2 - F1, x2 - x1, y2 - y1
    tiny = _roundoff(F1, F2)

    excess4 = -(dF + c.C2 * dx + c.C3 * dy)
    w4 = _first_witness(excess4 > tiny, j, t, x1, x2, y1, y2, excess4)
    excess5 = dF - c.L1 * dx - c.L2 * dy
    w5 = _first_witness(excess5 > tiny, j, t, x1, x2, y1, y2, excess5)
    h3 = _check_H3(p, min(samples, 200), rng)
    h4 = HypothesisCheck("H4", w4 is None, samples, w4)
    h5 = HypothesisCheck("H5", w5 is None, samples, w5)
    return QuasiMonotoneReport(h3, h4, h5, derived if (h3.ok and h4.ok) else None)


# -- uniqueness ------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    kappa: float
    certified: bool
    C: float
    C_S: float
    M_S: float
    N: float
    L1: float
    L2: float
    C1: float
    period: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def uniqueness_certificate(p: DelayedProblem, op: PeriodicOperator, substeps: int = 64) -> Certificate:
    """Contraction factor ``kappa = N (L1 + C + L2 C1) C_S M_S period``.

    ``C`` is the shift actually used by ``op``; ``kappa < 1`` certifies a
    unique periodic solution in ``[v0, w0]`` and geometric decay of the gap
    ``|w_i - v_i|_C``.
    """
    c = p.constants
    if c.L1 is None or c.L2 is None:
        raise HypothesisError("uniqueness certificate needs L1 and L2")
    C1 = c.C1
    if C1 is None:
        if c.L2:
            raise HypothesisError("uniqueness certificate needs C1 when L2 > 0")
        C1 = 0.0
    C = op.generator.shift
    C_S = op.resolvent_norm
    M_S = sup_norm_bound(op.generator, op.period, substeps)
    kappa = c.N * (c.L1 + C + c.L2 * C1) * C_S * M_S * op.period
    return Certificate(kappa, kappa < 1.0, C, C_S, M_S, c.N, c.L1, c.L2, C1, op.period)


# -- iteration -------------------------------------------------------------------

@dataclass
class IterationReport:
    status: Status
    lower_iterates: list
    upper_iterates: list
    monotone_slack: list
    gaps: list
    lower_steps: list
    upper_steps: list
    tolerance: float
    slack: float
    fixed_point_residuals: dict = field(default_factory=dict)
    mild_residuals: dict = field(default_factory=dict)
    violation: dict | None = None

    @property
    def iterations(self) -> int:
        return len(self.gaps) - 1

    @property
    def lower(self) -> PeriodicGridFunction:
        return self.lower_iterates[-1]

    @property
    def upper(self) -> PeriodicGridFunction:
        return self.upper_iterates[-1]

    @property
    def contraction_ratios(self) -> list:
        return [g1 / g0 if g0 > 0 else math.nan for g0, g1 in zip(self.gaps, self.gaps[1:])]

    @property
    def converged(self) -> bool:
        return self.status in (Status.EXTREMAL_PAIR, Status.UNIQUE_SOLUTION)

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "tolerance": self.tolerance,
            "slack": self.slack,
            "final_gap": self.gaps[-1],
            "worst_monotone_slack": min(self.monotone_slack) if self.monotone_slack else None,
            "fixed_point_residuals": self.fixed_point_residuals,
            "mild_residuals": self.mild_residuals,
            "violation": self.violation,
        }


def _locate(diff: np.ndarray) -> tuple:
    j, i = np.unravel_index(int(np.argmin(diff)), diff.shape)
    return int(j), int(i), float(diff[j, i])


def iterate(p: DelayedProblem, op: PeriodicOperator, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER, verify_tol: float = DEFAULT_VERIFY_TOL) -> IterationReport:
    """Run ``v_i = Q v_{i-1}``, ``w_i = Q w_{i-1}`` from the bracket ``(v0, w0)``.

    After every step the chain ``v_{i-1} <= v_i <= w_i <= w_{i-1}`` is
    checked; a violation beyond ``1e-9 (1 + |w0|_C)`` stops the run with
    status ``monotonicity_violated``.

    The run stops once both step sizes are at most ``tol`` and the gap
    ``|w_i - v_i|_C`` is either at most ``tol`` (``unique_solution``) or has
    stopped contracting (``extremal_pair``).
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    lo = verify_lower_solution(p, p.lower, verify_tol)
    if not lo.ok:
        raise InvalidBracketError(
            f"invalid lower solution: slack {lo.worst_violation:.3g} at node {lo.node}, "
            f"component {lo.component}")
    up = verify_upper_solution(p, p.upper, verify_tol)
    if not up.ok:
        raise InvalidBracketError(
            f"invalid upper solution: slack {up.worst_violation:.3g} at node {up.node}, "
            f"component {up.component}")

    slack = _slack(p)
    v, w = p.lower, p.upper
    report = IterationReport(Status.MAX_ITER_REACHED, [v], [w], [], [(w - v).norm()], [], [],
                             tol, slack)
    C = op.generator.shift
    for i in range(1, max_iter + 1):
        v_new = apply_P(op, eval_F_shifted(p, v, C))
        w_new = apply_P(op, eval_F_shifted(p, w, C))
        checks = {
            "lower_increase": v_new.values - v.values,
            "upper_decrease": w.values - w_new.values,
            "order": w_new.values - v_new.values,
        }
        located = {k: _locate(d) for k, d in checks.items()}
        worst_kind = min(located, key=lambda k: located[k][2])
        worst = located[worst_kind][2]
        report.lower_iterates.append(v_new)
        report.upper_iterates.append(w_new)
        report.monotone_slack.append(worst)
        report.gaps.append((w_new - v_new).norm())
        report.lower_steps.append((v_new - v).norm())
        report.upper_steps.append((w_new - w).norm())
        v, w = v_new, w_new
        if worst < -slack:
            node, comp, value = located[worst_kind]
            report.status = Status.MONOTONICITY_VIOLATED
            report.violation = {"step": i, "kind": worst_kind, "node": node,
                                "t": float(p.times[node]), "component": comp, "value": value}
            log.warning("monotonicity violated at step %d: %s", i, report.violation)
            break
        if max(report.lower_steps[-1], report.upper_steps[-1]) <= tol:
            gap, prev = report.gaps[-1], report.gaps[-2]
            # small steps with a gap still contracting: the limits have not met yet
            if gap <= tol or gap > _STALL * prev:
                report.status = Status.UNIQUE_SOLUTION if gap <= tol else Status.EXTREMAL_PAIR
                break

    for label, u in (("lower", v), ("upper", w)):
        Fu = eval_F_shifted(p, u, C)
        report.fixed_point_residuals[label] = (apply_P(op, Fu) - u).norm()
        report.mild_residuals[label] = mild_residual(op, u, Fu)
    log.info("monotone iteration finished: %s after %d steps, gap %.3g",
             report.status.value, report.iterations, report.gaps[-1])
    return report


def _fixed_point_from(p, op, u, tol, max_iter):
    C = op.generator.shift
    for _ in range(max_iter):
        nxt = apply_P(op, eval_F_shifted(p, u, C))
        if (nxt - u).norm() <= tol:
            return nxt, True
        u = nxt
    return u, False


def extremality_check(p: DelayedProblem, op: PeriodicOperator, report: IterationReport,
                      probes: int = 3, rng_seed: int = 0, tol: float | None = None,
                      max_iter: int = DEFAULT_MAX_ITER) -> bool:
    """Check that further fixed points of ``Q`` lie between the computed extremes.

    Probe 0 starts at ``v0``, probe 1 at the midpoint of ``[v0, w0]``, the
    rest at random points of the interval.  Each probe is iterated until
    ``|Q u - u|_C <= tol``.
    """
    if not report.converged:
        raise ValueError(f"extremality needs a converged report, got status {report.status.value}")
    tol = report.tolerance if tol is None else tol
    rng = np.random.default_rng(rng_seed)
    v0, w0 = p.lower, p.upper
    band = report.slack + 100.0 * tol
    ok = True
    for k in range(probes):
        if k == 0:
            start = v0
        elif k == 1:
            start = 0.5 * (v0 + w0)
        else:
            frac = rng.random(v0.values.shape)
            start = PeriodicGridFunction(p.period, v0.values + frac * (w0.values - v0.values))
        u, converged = _fixed_point_from(p, op, start, tol, max_iter)
        inside = (np.min(u.values - report.lower.values) >= -band
                  and np.min(report.upper.values - u.values) >= -band)
        log.info("extremality probe %d: converged=%s inside=%s", k, converged, inside)
        ok = ok and inside
    return bool(ok)
