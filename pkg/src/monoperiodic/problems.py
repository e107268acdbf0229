"""Finite-dimensional test problems and independent reference solutions.

* ``parabolic_1d``: ``u_t - D u_xx = f(x, t, u, u(t - tau))`` on ``(0, 1)``
  with zero Dirichlet data, central differences in space.
* ``transport_periodic``: ``u_t + u_x = f(x, t, u, u(t - tau))`` with
  ``2 pi``-periodic boundary conditions, upwind differences in space.
* ``scalar_delay``: ``u' + a u = k u(t - tau) + c sin(2 pi t / period)``.
* ``scalar_bistable``: ``u' + u = u + u(t - tau) - u^3``, whose minimal and
  maximal periodic solutions in ``[-2, 2]`` are ``-1`` and ``1``.

Spatial right-hand sides are given pointwise as ``f(x, t, u, v)`` with numpy
broadcasting; ``x`` is passed with shape ``(1, n)`` and ``t`` as ``(k, 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .monotone_solver import (DelayedProblem, HypothesisConstants, InvalidBracketError,
                              verify_lower_solution, verify_upper_solution)
from .periodic_operator import PeriodicGridFunction, quadrature_weights

KINDS = ("parabolic_1d", "transport_periodic", "scalar_delay", "scalar_bistable")


class DivergenceError(RuntimeError):
    """The reference time stepper blew up."""


@dataclass
class ProblemRecipe:
    kind: str
    nodes: int = 256
    period: float = 2 * math.pi
    delay: float = 0.0
    spatial_nodes: int = 1
    params: dict = field(default_factory=dict)
    rhs: Callable | None = None
    lower: Callable | None = None
    upper: Callable | None = None
    constants: HypothesisConstants | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")


# -- matrices -------------------------------------------------------------------

def dirichlet_laplacian(n: int, diffusion: float = 1.0) -> np.ndarray:
    """``D (n+1)^2 tridiag(-1, 2, -1)``: ``-D d^2/dx^2`` on ``(0, 1)``, zero boundary values."""
    if n < 2:
        raise ValueError("need at least 2 interior nodes")
    A = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return diffusion * (n + 1) ** 2 * A


def upwind_transport(n: int, length: float = 2 * math.pi, speed: float = 1.0) -> np.ndarray:
    """Circulant ``(A u)_i = speed (u_i - u_{i-1}) / h``, ``h = length / n``."""
    if n < 2:
        raise ValueError("need at least 2 spatial nodes")
    A = np.eye(n) - np.roll(np.eye(n), -1, axis=1)
    return speed * (n / length) * A


def cyclic_shift(n: int) -> np.ndarray:
    return np.roll(np.eye(n), 1, axis=0)


# -- helpers ------------------------------------------------------------------------

def _grid_function(value, period, nodes, x=None, n=1):
    """Turn a constant, array or callable ``value(t[, x])`` into a grid function."""
    t = np.arange(nodes) * (period / nodes)
    if callable(value):
        vals = value(t[:, None]) if x is None else value(t[:, None], x[None, :])
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (nodes, n))
    else:
        arr = np.asarray(value, dtype=float)
        vals = np.broadcast_to(arr, (nodes, n)) if arr.ndim <= 1 else arr
    return PeriodicGridFunction(period, vals)


def _validated(p: DelayedProblem, tol: float = 1e-8) -> DelayedProblem:
    lo = verify_lower_solution(p, p.lower, tol)
    if not lo.ok:
        raise InvalidBracketError(f"invalid lower solution for {p.name}: slack {lo.worst_violation:.3g}")
    up = verify_upper_solution(p, p.upper, tol)
    if not up.ok:
        raise InvalidBracketError(f"invalid upper solution for {p.name}: slack {up.worst_violation:.3g}")
    return p


def _pointwise(f, x):
    def F(t, u, v):
        return f(x[None, :], t, u, v)
    return F


# -- builders ---------------------------------------------------------------------

def build_parabolic(spatial_nodes: int = 50, nodes: int = 64, period: float = 1.0,
                    delay: float = 0.25, diffusion: float = 1.0, f: Callable | None = None,
                    upper_scale: float = 2.0, upper=None, lower=None,
                    constants: HypothesisConstants | None = None) -> DelayedProblem:
    """Dirichlet reaction-diffusion problem with ``v0 = 0``.

    The default ``f = 1 + v/2`` and the default upper solution
    ``w0 = upper_scale * z`` with ``A z = 1`` (discrete torsion function),
    which is an upper solution whenever ``upper_scale >= 1 + upper_scale * max(z) / 2``.
    """
    n = spatial_nodes
    A = dirichlet_laplacian(n, diffusion)
    x = np.arange(1, n + 1) / (n + 1)
    if f is None:
        f = lambda x, t, u, v: 1.0 + 0.5 * v + 0.0 * u  # noqa: E731
        if constants is None:
            constants = HypothesisConstants(C=0.0, C1=0.1, C2=0.0, C3=0.0, L1=0.0, L2=0.5)
    if upper is None:
        z = np.linalg.solve(A, np.ones(n))
        w0 = PeriodicGridFunction.constant(upper_scale * z, period, nodes)
    else:
        w0 = _grid_function(upper, period, nodes, x, n)
    v0 = _grid_function(0.0 if lower is None else lower, period, nodes, x, n)
    p = DelayedProblem(A, _pointwise(f, x), period, delay, v0, w0,
                       constants or HypothesisConstants(), name="parabolic_1d",
                       meta={"kind": "parabolic_1d", "x": x, "diffusion": diffusion})
    return _validated(p)


def build_transport(spatial_nodes: int = 64, nodes: int = 64, delay: float = 1.0,
                    period: float = 2 * math.pi, f: Callable | None = None,
                    upper_level: float = 4.0, upper=None, lower=None,
                    constants: HypothesisConstants | None = None) -> DelayedProblem:
    """Doubly periodic transport problem ``u_t + u_x = f`` with ``v0 = 0``.

    Default ``f = 1 + sin(x) sin(t)/2 - u + v/2``; then ``f + u`` is
    nondecreasing in ``(u, v)``, so the shift ``C = 1`` works, and the
    constant ``upper_level >= 3`` is an upper solution.
    """
    m = spatial_nodes
    A = upwind_transport(m)
    x = np.arange(m) * (2 * math.pi / m)
    if f is None:
        f = lambda x, t, u, v: 1.0 + 0.5 * np.sin(x) * np.sin(t) - u + 0.5 * v  # noqa: E731
        if constants is None:
            constants = HypothesisConstants(C=1.0, C1=0.1, C2=1.0, C3=0.0, L1=0.0, L2=0.5)
    w0 = _grid_function(upper_level if upper is None else upper, period, nodes, x, m)
    v0 = _grid_function(0.0 if lower is None else lower, period, nodes, x, m)
    p = DelayedProblem(A, _pointwise(f, x), period, delay, v0, w0,
                       constants or HypothesisConstants(C=1.0), name="transport_periodic",
                       meta={"kind": "transport_periodic", "x": x})
    return _validated(p)


def build_scalar(a: float, rhs: Callable, lower, upper, delay: float = 0.0,
                 period: float = 2 * math.pi, nodes: int = 256,
                 constants: HypothesisConstants | None = None, name: str = "scalar",
                 meta: dict | None = None) -> DelayedProblem:
    """Scalar problem ``u' + a u = rhs(t, u, u(t - delay))``.

    ``lower``/``upper`` are constants or callables of ``t``.
    """
    v0 = _grid_function(lower, period, nodes)
    w0 = _grid_function(upper, period, nodes)
    p = DelayedProblem([[a]], rhs, period, delay, v0, w0, constants or HypothesisConstants(),
                       name=name, meta=dict(meta or {}, kind=name))
    return _validated(p)


def build_scalar_delay(a: float = 2.0, k: float = 0.5, c: float = 1.0, delay: float = math.pi / 2,
                       period: float = 2 * math.pi, nodes: int = 256) -> DelayedProblem:
    """``u' + a u = k u(t - delay) + c sin(2 pi t / period)`` with bracket ``[-K, K]``.

    ``K = (|c| + 1) / (a - k)``.  Requires ``a > 0``, ``k >= 0`` and ``a > k``.
    """
    if a <= 0 or k < 0:
        raise ValueError("scalar benchmark needs a > 0 and k >= 0")
    if a <= k:
        raise ValueError("no constant upper solution exists at this recipe (a <= k)")
    K = (abs(c) + 1.0) / (a - k)
    nu = 2 * math.pi / period

    def rhs(t, x, y):
        return k * y + c * np.sin(nu * t)

    constants = HypothesisConstants(C=0.0, C1=0.1, C2=0.0, C3=0.0, L1=0.0, L2=k)
    meta = {"a": a, "k": k, "c": c}
    return build_scalar(a, rhs, -K, K, delay, period, nodes, constants, "scalar_delay", meta)


def build_scalar_bistable(delay: float = 1.0, period: float = 2 * math.pi,
                          nodes: int = 128) -> DelayedProblem:
    """``u' + u = u + u(t - delay) - u^3`` on ``[-2, 2]``; extremal solutions are ``-1`` and ``1``."""
    def rhs(t, x, y):
        return x + y - x ** 3

    constants = HypothesisConstants(C=11.0)
    return build_scalar(1.0, rhs, -2.0, 2.0, delay, period, nodes, constants, "scalar_bistable")


def build(recipe: ProblemRecipe) -> DelayedProblem:
    """Dispatch a :class:`ProblemRecipe` to its builder."""
    kw = dict(recipe.params)
    common = {}
    if recipe.rhs is not None:
        common["f"] = recipe.rhs
    if recipe.lower is not None:
        common["lower"] = recipe.lower
    if recipe.upper is not None:
        common["upper"] = recipe.upper
    if recipe.constants is not None:
        common["constants"] = recipe.constants
    if recipe.kind == "parabolic_1d":
        return build_parabolic(recipe.spatial_nodes, recipe.nodes, recipe.period, recipe.delay,
                               **kw, **common)
    if recipe.kind == "transport_periodic":
        return build_transport(recipe.spatial_nodes, recipe.nodes, recipe.delay, recipe.period,
                               **kw, **common)
    if recipe.kind == "scalar_bistable":
        if common:
            raise ValueError("scalar_bistable takes no rhs/lower/upper/constants overrides")
        return build_scalar_bistable(recipe.delay, recipe.period, recipe.nodes)
    # scalar_delay
    if not common:
        return build_scalar_delay(delay=recipe.delay, period=recipe.period, nodes=recipe.nodes, **kw)
    a = kw.pop("a", 1.0)
    k, c = kw.pop("k", 0.0), kw.pop("c", 0.0)
    if kw:
        raise ValueError(f"unexpected scalar parameters: {sorted(kw)}")
    nu = 2 * math.pi / recipe.period
    rhs = common.get("f")
    if rhs is None:
        rhs = lambda t, x, y: k * y + c * np.sin(nu * t)  # noqa: E731
    else:
        f = rhs
        rhs = lambda t, x, y: f(0.0, t, x, y)  # noqa: E731
    K = (abs(c) + 1.0) / (a - k) if a > k else None
    lower = common.get("lower", -K if K is not None else None)
    upper = common.get("upper", K)
    if lower is None or upper is None:
        raise ValueError("scalar problem needs explicit lower/upper when a <= k")
    if callable(lower):
        lo = lower
        lower = lambda t: lo(t, 0.0)  # noqa: E731
    if callable(upper):
        up = upper
        upper = lambda t: up(t, 0.0)  # noqa: E731
    return build_scalar(a, rhs, lower, upper, recipe.delay, recipe.period, recipe.nodes,
                        common.get("constants"), "scalar_delay", {"a": a, "k": k, "c": c})


# -- reference solutions ------------------------------------------------------------

def fourier_amplitude(a: float, k: float, c: float, delay: float, period: float = 2 * math.pi) -> complex:
    """Complex amplitude of the periodic solution of the linear scalar benchmark.

    Substituting ``u = Im(A e^{i nu t})`` with ``nu = 2 pi / period`` gives
    ``A (i nu + a - k e^{-i nu delay}) = c``.
    """
    nu = 2 * math.pi / period
    return c / (1j * nu + a - k * np.exp(-1j * nu * delay))


def fourier_solution(a: float, k: float, c: float, delay: float, period: float = 2 * math.pi):
    """Closed-form periodic solution ``t -> Im(A e^{i nu t})``."""
    amp = fourier_amplitude(a, k, c, delay, period)
    nu = 2 * math.pi / period
    return lambda t: np.imag(amp * np.exp(1j * nu * np.asarray(t, dtype=float)))


def timestep_oracle(p: DelayedProblem, periods: int = 50, substeps: int = 10,
                    order: int = 2) -> PeriodicGridFunction:
    """Integrate the delayed equation forward and return its last period on ``p``'s grid.

    Method of steps on a grid ``substeps`` times finer than ``p``'s, starting
    from the history ``v0``.  The linear part ``A + C I`` is propagated
    exactly; the rest ``G = F + C u`` is frozen over each substep
    (``order=1``, exponential Euler) or corrected with a second stage
    (``order=2``, exponential Runge-Kutta of Cox-Matthews type).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    g = p.shifted_generator()
    C = g.shift
    m, n = p.nodes, p.dimension
    dt = p.period / (m * substeps)
    S, W0, W1 = quadrature_weights(g, dt, "exponential")
    phi1, phi2 = W0 + W1, W1  # dt*phi1, dt*phi2
    total = periods * m * substeps
    U = np.empty((total + 1, n))
    U[0] = p.lower[0]
    lag = p.delay / dt
    limit = 1e6 * max(1.0, p.upper.norm())

    def past(i, pred=None):
        # u(t_i - delay), t_i = i * dt; pred is the predicted value at t_i
        s = i - lag
        if s < 0:
            return p.lower(s * dt)
        k = math.floor(s + 1e-9)
        frac = max(s - k, 0.0)
        if frac < 1e-9:
            return U[k] if k < i else pred
        hi = U[k + 1] if k + 1 < i else pred
        return (1.0 - frac) * U[k] + frac * hi

    def G(i, u, y):
        return p.evaluate([i * dt], u[None, :], y[None, :])[0] + C * u

    for i in range(total):
        u = U[i]
        Gi = G(i, u, past(i, u))
        nxt = S @ u + phi1 @ Gi
        if order == 2:
            nxt = nxt + phi2 @ (G(i + 1, nxt, past(i + 1, nxt)) - Gi)
        if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > limit:
            raise DivergenceError(f"time stepping diverged at t = {(i + 1) * dt:.6g}")
        U[i + 1] = nxt
    start = (periods - 1) * m * substeps
    return PeriodicGridFunction(p.period, U[start:start + m * substeps:substeps])
