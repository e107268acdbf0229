"""Periodic mild solutions of the linear problem ``u' + (A + C I) u = h``.

Time is discretised on the uniform grid ``t_j = j * period / m``.  Between
nodes the forcing is propagated exactly through the semigroup:

    u(t_{j+1}) = S(dt) u(t_j) + q_j,
    q_j ~ int_{t_j}^{t_{j+1}} S(t_{j+1} - s) h(s) ds = W0 h_j + W1 h_{j+1}.

Two rules for ``(W0, W1)`` are provided.  ``"exponential"`` integrates the
piecewise linear interpolant of ``h`` exactly (phi-function weights), so it
is exact for constant forcing.  ``"trapezoid"`` uses
``W0 = dt/2 S(dt)``, ``W1 = dt/2 I``.  Both are second order and both keep
nonnegative weights for a positivity generator.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .semigroup import Generator, UnstableGeneratorError, inf_norm, spectral_radius

QUADRATURES = ("exponential", "trapezoid")

# fractional grid offsets below this are treated as exact grid shifts
_SNAP = 1e-9


class GridMismatchError(ValueError):
    """Grid functions or operators do not share period, nodes or dimension."""


@dataclass(frozen=True, eq=False)
class PeriodicGridFunction:
    """``period``-periodic function sampled at ``m`` uniform nodes.

    ``values[j]`` is the value at ``t_j = j * period / m``; indices are taken
    modulo ``m`` and times modulo ``period``.
    """

    period: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise ValueError(f"values must be (m, n), got shape {vals.shape}")
        if vals.shape[0] < 2:
            raise ValueError("a periodic grid function needs at least 2 nodes")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, f, period: float, nodes: int) -> "PeriodicGridFunction":
        """Sample ``f(t)`` (vector valued) at the grid nodes."""
        t = np.arange(nodes) * (period / nodes)
        return cls(period, np.array([np.atleast_1d(f(tj)) for tj in t], dtype=float))

    @classmethod
    def constant(cls, value, period: float, nodes: int) -> "PeriodicGridFunction":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(period, np.tile(value, (nodes, 1)))

    @property
    def nodes(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def step(self) -> float:
        return self.period / self.nodes

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nodes) * self.step

    def __getitem__(self, j):
        return self.values[j % self.nodes]

    def __call__(self, t):
        """Periodic piecewise linear interpolation at time(s) ``t``."""
        s = np.mod(np.asarray(t, dtype=float), self.period) / self.step
        k = np.floor(s).astype(int)
        frac = (s - k)[..., None]
        k = k % self.nodes
        out = (1.0 - frac) * self.values[k] + frac * self.values[(k + 1) % self.nodes]
        return out

    def delayed(self, delay: float) -> np.ndarray:
        """Array of ``u(t_j - delay)``, linear interpolation between nodes."""
        s = (delay % self.period) / self.step
        k = math.floor(s)
        frac = s - k
        if frac < _SNAP:
            frac = 0.0
        elif frac > 1.0 - _SNAP:
            k, frac = k + 1, 0.0
        base = np.roll(self.values, k, axis=0)
        if frac == 0.0:
            return base
        return (1.0 - frac) * base + frac * np.roll(self.values, k + 1, axis=0)

    def norm(self) -> float:
        """``|u|_C``: max over nodes of the max norm."""
        return float(np.max(np.abs(self.values)))

    def roll(self, k: int) -> "PeriodicGridFunction":
        """Values moved ``k`` nodes later in time: ``result[j] = self[j - k]``."""
        return PeriodicGridFunction(self.period, np.roll(self.values, k, axis=0))

    def same_grid(self, other: "PeriodicGridFunction") -> bool:
        return (self.values.shape == other.values.shape
                and math.isclose(self.period, other.period, rel_tol=1e-12))

    def _coerce(self, other):
        if isinstance(other, PeriodicGridFunction):
            if not self.same_grid(other):
                raise GridMismatchError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return PeriodicGridFunction(self.period, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return PeriodicGridFunction(self.period, self.values - self._coerce(other))

    def __rsub__(self, other):
        return PeriodicGridFunction(self.period, self._coerce(other) - self.values)

    def __mul__(self, alpha):
        return PeriodicGridFunction(self.period, float(alpha) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicGridFunction(self.period, -self.values)

    def __repr__(self):
        return (f"PeriodicGridFunction(period={self.period!r}, nodes={self.nodes}, "
                f"dimension={self.dimension})")


def quadrature_weights(g: Generator, dt: float, rule: str = "exponential"):
    """Return ``(S(dt), W0, W1)`` for one grid step."""
    n = g.dimension
    if rule == "exponential":
        Z = -dt * g.shifted
        block = np.zeros((3 * n, 3 * n))
        block[:n, :n] = Z
        block[:n, n:2 * n] = np.eye(n)
        block[n:2 * n, 2 * n:] = np.eye(n)
        E = scipy.linalg.expm(block)
        S = E[:n, :n]
        phi1 = E[:n, n:2 * n]
        phi2 = E[:n, 2 * n:]
        return S, dt * (phi1 - phi2), dt * phi2
    if rule == "trapezoid":
        S = g.propagator(dt)
        return S, 0.5 * dt * S, 0.5 * dt * np.eye(n)
    raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {QUADRATURES}")


def periodic_resolvent(g: Generator, period: float) -> np.ndarray:
    """``(I - S(period))^{-1}`` by a direct solve."""
    S = g.propagator(period)
    return _resolvent_from(S)


def _resolvent_from(S_period: np.ndarray) -> np.ndarray:
    rho = spectral_radius(S_period)
    if not rho < 1.0:
        raise UnstableGeneratorError(
            f"spectral radius of S(period) is {rho:.6g} >= 1: not exponentially stable; "
            "apply finalize_shift first")
    n = S_period.shape[0]
    return np.linalg.solve(np.eye(n) - S_period, np.eye(n))


@dataclass(frozen=True, eq=False)
class PeriodicOperator:
    """Precomputed data for the periodic solution map ``P`` on one grid."""

    generator: Generator
    period: float
    nodes: int
    step_propagator: np.ndarray
    period_propagator: np.ndarray
    periodic_resolvent: np.ndarray
    quadrature: str
    weights: tuple

    @classmethod
    def build(cls, generator: Generator, period: float, nodes: int,
              quadrature: str = "exponential") -> "PeriodicOperator":
        if nodes < 2:
            raise ValueError("need at least 2 grid nodes")
        if nodes == 2:
            warnings.warn("periodic operator on a 2-node grid is very coarse", stacklevel=2)
        if not generator.stable:
            raise UnstableGeneratorError(
                f"shifted growth exponent {generator.nu1:.6g} >= 0: not exponentially stable; "
                "apply finalize_shift first")
        dt = period / nodes
        S, W0, W1 = quadrature_weights(generator, dt, quadrature)
        # S(period) from the step propagator so the periodic closure is exact on the grid
        S_period = np.linalg.matrix_power(S, nodes)
        R = _resolvent_from(S_period)
        arrays = [np.ascontiguousarray(a) for a in (S, S_period, R, W0, W1)]
        for a in arrays:
            a.setflags(write=False)
        S, S_period, R, W0, W1 = arrays
        return cls(generator, float(period), int(nodes), S, S_period, R, quadrature, (W0, W1))

    @property
    def step(self) -> float:
        return self.period / self.nodes

    @property
    def resolvent_norm(self) -> float:
        """``C_S = |(I - S(period))^{-1}|_inf``."""
        return inf_norm(self.periodic_resolvent)

    def check_grid(self, h: PeriodicGridFunction):
        if (h.nodes != self.nodes or h.dimension != self.generator.dimension
                or not math.isclose(h.period, self.period, rel_tol=1e-12)):
            raise GridMismatchError(
                f"grid function (period={h.period}, nodes={h.nodes}, dim={h.dimension}) does not "
                f"match operator (period={self.period}, nodes={self.nodes}, "
                f"dim={self.generator.dimension})")

    def increments(self, h: PeriodicGridFunction) -> np.ndarray:
        """Quadrature values ``q_j`` of the forcing ``h`` over each grid step."""
        self.check_grid(h)
        W0, W1 = self.weights
        return _kernels.increments(W0, W1, np.ascontiguousarray(h.values))


def apply_P(op: PeriodicOperator, h: PeriodicGridFunction) -> PeriodicGridFunction:
    """Discrete periodic mild solution of ``u' + (A + C I) u = h``."""
    Q = op.increments(h)
    U = _kernels.periodic_sweep(op.step_propagator, op.periodic_resolvent, Q)
    return PeriodicGridFunction(op.period, U)


def mild_residual(op: PeriodicOperator, u: PeriodicGridFunction, h: PeriodicGridFunction) -> float:
    """``max_j |u(t_{j+1}) - S(dt) u(t_j) - q_j(h)|`` including the wrap-around step."""
    op.check_grid(u)
    Q = op.increments(h)
    return float(_kernels.step_residual(op.step_propagator, np.ascontiguousarray(u.values), Q))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> np.ndarray:
        j = int(round((t - self.times[0]) / (self.times[1] - self.times[0])))
        return self.values[j]


def ivp_solve(g: Generator, x0, h: PeriodicGridFunction, horizon: float,
              quadrature: str = "exponential") -> Trajectory:
    """Mild solution ``S(t) x0 + int_0^t S(t - s) h(s) ds`` of the initial value problem.

    Uses the same one-step recurrence as :func:`apply_P` but starts from
    ``x0`` instead of closing the period.  ``horizon`` must be a multiple of
    the grid step of ``h``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (g.dimension,) or h.dimension != g.dimension:
        raise GridMismatchError("initial value, forcing and generator dimensions differ")
    dt = h.step
    k = horizon / dt
    steps = int(round(k))
    if steps < 1 or abs(k - steps) > 1e-9 * max(1.0, k):
        raise ValueError(f"horizon {horizon} is not a positive multiple of the step {dt}")
    S, W0, W1 = quadrature_weights(g, dt, quadrature)
    idx = np.arange(steps + 1) % h.nodes
    H = np.ascontiguousarray(h.values[idx])
    Q = np.ascontiguousarray(H[:-1] @ W0.T + H[1:] @ W1.T)
    X = _kernels.linear_sweep(np.ascontiguousarray(S), x0, Q)
    return Trajectory(np.arange(steps + 1) * dt, X)
