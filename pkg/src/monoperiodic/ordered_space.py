"""Componentwise order on R^n.

The positive cone is ``K = {x : x_j >= 0 for all j}``.  Together with the max
norm it is normal with normal constant 1: ``0 <= x <= y`` implies
``|x|_inf <= |y|_inf``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMAL_CONSTANT = 1.0

# slack used by solver-facing checks; property tests use 0
DEFAULT_SLACK = 1e-10


class DimensionError(ValueError):
    """Raised when vectors or grid functions do not share a shape."""


@dataclass(frozen=True)
class ConeOrder:
    dimension: int
    tolerance: float = 0.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not self.tolerance >= 0.0:
            raise ValueError(f"tolerance must be nonnegative, got {self.tolerance!r}")

    @property
    def normal_constant(self) -> float:
        return NORMAL_CONSTANT


def _as_vector(x, order: ConeOrder) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (order.dimension,):
        raise DimensionError(f"expected a vector of length {order.dimension}, got shape {x.shape}")
    return x


def cone_contains(x, order: ConeOrder) -> bool:
    """True iff ``min_j x_j >= -tolerance``."""
    x = _as_vector(x, order)
    return bool(np.min(x) >= -order.tolerance)


def leq(x, y, order: ConeOrder) -> bool:
    """``x <= y`` in the cone order, i.e. ``y - x`` lies in the cone."""
    x = _as_vector(x, order)
    y = _as_vector(y, order)
    return cone_contains(y - x, order)


def max_norm(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def in_order_interval(u, v, w, tolerance: float = 0.0) -> bool:
    """Nodewise test ``v(t_j) <= u(t_j) <= w(t_j)`` for grid functions.

    Arguments may be :class:`~monoperiodic.periodic_operator.PeriodicGridFunction`
    instances or raw ``(m, n)`` arrays.
    """
    vals = []
    for f in (u, v, w):
        vals.append(np.asarray(getattr(f, "values", f), dtype=float))
    periods = {getattr(f, "period", None) for f in (u, v, w)} - {None}
    if len(periods) > 1:
        raise DimensionError(f"grid functions have different periods: {sorted(periods)}")
    uu, vv, ww = vals
    if not (uu.shape == vv.shape == ww.shape):
        raise DimensionError(f"grid mismatch: {uu.shape}, {vv.shape}, {ww.shape}")
    return bool(np.min(uu - vv) >= -tolerance and np.min(ww - uu) >= -tolerance)
