"""Small input checks shared by the estimators."""
from __future__ import annotations

import numpy as np

__all__ = ["check_finite_array", "check_hermitian", "check_generator", "check_problem"]


def check_finite_array(x, name, shape=None, dtype=float, ndim=None):
    """Convert to an array and reject NaN/inf or a wrong shape."""
    a = np.asarray(x, dtype=dtype)
    if ndim is not None and a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if shape is not None and a.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_hermitian(A, name="matrix", atol=1e-12):
    """Raise unless ``A`` is Hermitian up to ``atol`` relative to its largest entry."""
    A = np.asarray(A)
    scale = max(float(np.max(np.abs(A))), 1.0) if A.size else 1.0
    if np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2))), initial=0.0) > atol * scale:
        raise ValueError(f"{name} is not Hermitian")
    return A


def check_generator(seed):
    """``numpy.random.Generator`` from a seed, SeedSequence or existing generator."""
    return np.random.default_rng(seed)


def check_problem(problem):
    """Basic consistency checks on a beam-domain precoding problem."""
    S, K = problem.O.shape
    if set(np.unique(problem.O)) - {0, 1}:
        raise ValueError("association matrix must be binary")
    check_finite_array(problem.vbar, "vbar", dtype=complex)
    check_finite_array(problem.tx_power, "tx_power", shape=(S,))
    if np.any(problem.tx_power < 0):
        raise ValueError("tx_power must be nonnegative")
    if np.any(problem.weights < 0):
        raise ValueError("rate weights must be nonnegative")
    if problem.u.shape[:2] != (S, K):
        raise ValueError("statistical CSI does not match the association shape")
    return problem
