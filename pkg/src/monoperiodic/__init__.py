"""Periodic solutions of delayed evolution equations by monotone iteration.

Solves ``u'(t) + A u(t) = F(t, u(t), u(t - tau))`` for ``omega``-periodic
``u`` on a uniform time grid, starting from an ordered pair of lower and
upper solutions.
"""
from ._kernels import BACKEND
from .monotone_solver import (DelayedProblem, HypothesisConstants, IterationReport, Status,
                              check_H1, check_H3_H4_H5, extremality_check, iterate,
                              uniqueness_certificate)
from .ordered_space import ConeOrder, in_order_interval, leq, max_norm
from .periodic_operator import PeriodicGridFunction, PeriodicOperator, apply_P, ivp_solve
from .problems import ProblemRecipe, build, fourier_solution, timestep_oracle
from .semigroup import Generator, finalize_shift, growth_exponent, sup_norm_bound

__all__ = [
    "BACKEND", "ConeOrder", "DelayedProblem", "Generator", "HypothesisConstants",
    "IterationReport", "PeriodicGridFunction", "PeriodicOperator", "ProblemRecipe", "Status",
    "apply_P", "build", "check_H1", "check_H3_H4_H5", "extremality_check", "finalize_shift",
    "fourier_solution", "growth_exponent", "in_order_interval", "iterate", "ivp_solve", "leq",
    "max_norm", "sup_norm_bound", "timestep_oracle", "uniqueness_certificate",
]
__version__ = "0.1.0"
