"""Generators ``A`` and the shifted semigroups ``S(t) = exp(-t (A + C I))``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class GrowthExponentError(RuntimeError):
    """The eigensolver failed, so no growth exponent is available."""


class UnstableGeneratorError(ValueError):
    """The shifted semigroup is not exponentially stable."""


def _square(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"generator must be a square matrix, got shape {A.shape}")
    return A


def is_positivity_generator(A) -> bool:
    """True iff every off-diagonal entry of ``A`` is <= 0.

    Equivalently ``-A`` is Metzler, which in finite dimension is the same as
    ``exp(-tA) >= 0`` entrywise for all ``t >= 0``.
    """
    A = _square(A)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return bool(np.all(off <= 0.0))


def growth_exponent(A) -> float:
    """``nu0 = -min Re(eig(A))``, the growth exponent of ``exp(-tA)``."""
    A = _square(A)
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise GrowthExponentError(f"eigenvalue computation did not converge: {exc}") from exc
    if not np.all(np.isfinite(lam)):
        raise GrowthExponentError("eigenvalue computation returned non-finite values")
    return float(-np.min(lam.real))


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(_square(M)))))


def inf_norm(M) -> float:
    """Operator norm induced by the max vector norm (max absolute row sum)."""
    M = np.atleast_2d(M)
    return float(np.max(np.sum(np.abs(M), axis=1)))


def default_margin(nu0: float) -> float:
    return 0.1 * max(1.0, abs(nu0))


@dataclass(frozen=True)
class Generator:
    """Matrix ``A`` with its shift ``C``; ``-(A + C I)`` generates ``S(t)``."""

    matrix: np.ndarray
    shift: float = 0.0
    nu0: float = field(default=None)
    positive: bool = field(default=None)

    def __post_init__(self):
        A = _square(self.matrix).copy()
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        if self.shift < 0:
            raise ValueError(f"shift must be nonnegative, got {self.shift}")
        if self.nu0 is None:
            object.__setattr__(self, "nu0", growth_exponent(A))
        if self.positive is None:
            object.__setattr__(self, "positive", is_positivity_generator(A))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def nu1(self) -> float:
        """Growth exponent of the shifted semigroup."""
        return self.nu0 - self.shift

    @property
    def stable(self) -> bool:
        return self.nu1 < 0.0

    @property
    def shifted(self) -> np.ndarray:
        return self.matrix + self.shift * np.eye(self.dimension)

    def propagator(self, t: float) -> np.ndarray:
        """Matrix of ``S(t)``."""
        if t < 0:
            raise ValueError(f"semigroup is only defined for t >= 0, got {t}")
        return scipy.linalg.expm(-t * self.shifted)


def finalize_shift(A, C_candidate: float = 0.0, margin: float | None = None) -> Generator:
    """Return a :class:`Generator` whose shifted semigroup is exponentially stable.

    Keeps ``C_candidate`` when ``nu0 - C_candidate < 0``, otherwise uses
    ``C_candidate + |nu0| + margin``.
    """
    if C_candidate < 0:
        raise ValueError(f"shift candidate must be nonnegative, got {C_candidate}")
    A = _square(A)
    nu0 = growth_exponent(A)
    if margin is None:
        margin = default_margin(nu0)
    if margin <= 0:
        raise ValueError("margin must be positive")
    C = float(C_candidate)
    if nu0 - C >= 0.0:
        C = C + abs(nu0) + margin
    return Generator(A, shift=C, nu0=nu0)


def semigroup_apply(g: Generator, t: float, x) -> np.ndarray:
    """``S(t) x = exp(-t (A + C I)) x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.dimension:
        raise ValueError(f"vector has length {x.shape[-1]}, generator has dimension {g.dimension}")
    return g.propagator(t) @ x


def sup_norm_bound(g: Generator, period: float, substeps: int = 64) -> float:
    """Estimate ``M_S = sup_{t>=0} |S(t)|_inf`` on a grid of step ``period/substeps``.

    The grid covers ``[0, T]`` with ``T`` the first multiple of ``period``
    beyond ``10/|nu1|``.  For ``t >= T`` we use ``|S(t)| <= G |S(T)|^k`` with
    ``G`` the grid maximum; the horizon is doubled until ``|S(T)| <= 1`` so
    the tail cannot exceed ``G``.
    """
    if not g.stable:
        raise UnstableGeneratorError(
            f"shifted generator has growth exponent {g.nu1} >= 0; apply finalize_shift first")
    if period <= 0 or substeps < 1:
        raise ValueError("period must be positive and substeps >= 1")
    horizon = period * math.ceil((10.0 / abs(g.nu1)) / period)
    step = g.propagator(period / substeps)
    current = np.eye(g.dimension)
    best = 1.0
    t_steps = int(round(horizon / period)) * substeps
    done = 0
    for _ in range(8):
        for _ in range(t_steps - done):
            current = step @ current
            best = max(best, inf_norm(current))
        done = t_steps
        if inf_norm(current) <= 1.0:
            return best
        t_steps *= 2
    raise UnstableGeneratorError("could not bound the tail of |S(t)| within the search horizon")
