"""Sequential recurrences behind the periodic solution operator.

Every kernel has a numba version and a numpy version with the same
signature.  The numba versions are used when numba imports and the
environment variable ``MONOPERIODIC_DISABLE_NUMBA`` is unset (or ``0``);
:data:`BACKEND` names the active one.

All arrays are C-contiguous float64.  ``S``, ``W0``, ``W1``, ``R`` are
``(n, n)``; grid data ``H``, ``Q``, ``U`` are ``(m, n)`` with row ``j``
attached to node ``t_j``.
"""
from __future__ import annotations

import os

import numpy as np

_FLAG = "MONOPERIODIC_DISABLE_NUMBA"

# state dimension from which the numba kernels hand dense products to BLAS
_BLAS_MIN = 16


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in ("", "0", "false", "no")


# -- numpy path ---------------------------------------------------------------

def increments_np(W0, W1, H):
    """``q_j = W0 h_j + W1 h_{j+1}`` with periodic wrap."""
    return H @ W0.T + np.roll(H, -1, axis=0) @ W1.T


def periodic_sweep_np(S, R, Q):
    m, n = Q.shape
    z = np.zeros(n)
    for j in range(m):
        z = S @ z + Q[j]
    U = np.empty((m, n))
    U[0] = R @ z
    for j in range(m - 1):
        U[j + 1] = S @ U[j] + Q[j]
    return U


def linear_sweep_np(S, x0, Q):
    k, n = Q.shape
    X = np.empty((k + 1, n))
    X[0] = x0
    for j in range(k):
        X[j + 1] = S @ X[j] + Q[j]
    return X


def step_residual_np(S, U, Q):
    nxt = np.roll(U, -1, axis=0)
    return float(np.max(np.abs(nxt - U @ S.T - Q))) if U.size else 0.0


# -- numba path ---------------------------------------------------------------

def _build_numba():
    import numba

    @numba.njit(cache=True)
    def increments_nb(W0, W1, H):
        m, n = H.shape
        if n >= _BLAS_MIN:
            Hn = np.empty_like(H)
            Hn[:m - 1] = H[1:]
            Hn[m - 1] = H[0]
            return np.dot(H, W0.T) + np.dot(Hn, W1.T)
        Q = np.zeros((m, n))
        for j in range(m):
            jn = (j + 1) % m
            for i in range(n):
                acc = 0.0
                for k in range(n):
                    acc += W0[i, k] * H[j, k] + W1[i, k] * H[jn, k]
                Q[j, i] = acc
        return Q

    @numba.njit(cache=True)
    def _matvec_into(M, x, b, out):
        n = x.shape[0]
        if n >= _BLAS_MIN:
            out[:] = np.dot(M, x) + b
            return
        for i in range(n):
            acc = b[i]
            for k in range(n):
                acc += M[i, k] * x[k]
            out[i] = acc

    @numba.njit(cache=True)
    def periodic_sweep_nb(S, R, Q):
        m, n = Q.shape
        z = np.zeros(n)
        tmp = np.empty(n)
        for j in range(m):
            _matvec_into(S, z, Q[j], tmp)
            z[:] = tmp
        U = np.empty((m, n))
        _matvec_into(R, z, np.zeros(n), U[0])
        for j in range(m - 1):
            _matvec_into(S, U[j], Q[j], U[j + 1])
        return U

    @numba.njit(cache=True)
    def linear_sweep_nb(S, x0, Q):
        k, n = Q.shape
        X = np.empty((k + 1, n))
        X[0] = x0
        for j in range(k):
            _matvec_into(S, X[j], Q[j], X[j + 1])
        return X

    @numba.njit(cache=True)
    def step_residual_nb(S, U, Q):
        m, n = U.shape
        worst = 0.0
        if n >= _BLAS_MIN:
            SU = np.dot(U, S.T)
            for j in range(m):
                jn = (j + 1) % m
                for i in range(n):
                    r = abs(U[jn, i] - Q[j, i] - SU[j, i])
                    if r > worst:
                        worst = r
            return worst
        for j in range(m):
            jn = (j + 1) % m
            for i in range(n):
                acc = U[jn, i] - Q[j, i]
                for k in range(n):
                    acc -= S[i, k] * U[j, k]
                if abs(acc) > worst:
                    worst = abs(acc)
        return worst

    return increments_nb, periodic_sweep_nb, linear_sweep_nb, step_residual_nb


try:
    _NB = _build_numba() if _numba_requested() else None
except ImportError:  # numba missing
    _NB = None

NUMBA_AVAILABLE = _NB is not None
BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"

if NUMBA_AVAILABLE:
    increments_nb, periodic_sweep_nb, linear_sweep_nb, step_residual_nb = _NB
    increments, periodic_sweep, linear_sweep = increments_nb, periodic_sweep_nb, linear_sweep_nb
    step_residual = step_residual_nb
else:
    increments, periodic_sweep, linear_sweep = increments_np, periodic_sweep_np, linear_sweep_np
    step_residual = step_residual_np
