"""Iterative covariance-decomposition weighted-MMSE precoding."""
from __future__ import annotations

import logging

import numpy as np

from ..validation import check_finite_array
from .closed_form import cdm_stacked
from .covariance import (assemble_cov, q_vectors, sqrt_sig, tilde_sigma_all, ubound_rates,
                         update_C, update_D)
from .gradients import beta_tilde, gradient_pack, solve_W
from .problem import PrecoderSet, rescale_satellite_power

LOG = logging.getLogger(__name__)

__all__ = ["cdwmmse", "auxiliaries", "ubound_sum_rate_of"]


def auxiliaries(problem, W, sig_tilde=None):
    """Covariances and optimal ``D``, ``C``, ``E`` for every UT.

    Returns a dict with keys ``R_sig``, ``R_other``, ``R_half``, ``D``, ``C``
    and ``E`` (lists or stacked arrays indexed by UT).
    """
    if sig_tilde is None:
        sig_tilde = tilde_sigma_all(problem)
    qH = q_vectors(problem, W)
    Rs, Ro = assemble_cov(problem, W, qH)
    Rh = sqrt_sig(problem, W, sig_tilde, qH)
    D, C, E = [], [], []
    for k in range(problem.n_ut):
        Dk = update_D(Rs[k], Ro[k], Rh[k])
        Ck, Ek = update_C(Rs[k], Ro[k], Rh[k], Dk)
        D.append(Dk)
        C.append(Ck)
        E.append(Ek)
    return dict(R_sig=Rs, R_other=Ro, R_half=Rh, D=D, C=C, E=E)


def ubound_sum_rate_of(problem, W):
    """Weighted upper-bound sum rate of stacked precoders ``W``."""
    Rs, Ro = assemble_cov(problem, W)
    return float(problem.weights @ ubound_rates(Rs, Ro))


def _random_init(problem, rng):
    K, M = problem.n_ut, problem.streams
    W = np.zeros((K, problem.n_beams, M), dtype=complex)
    for k in range(K):
        idx = problem.serving_beams(k)
        Z = rng.standard_normal((idx.size, M)) + 1j * rng.standard_normal((idx.size, M))
        W[k, idx] = Z * np.sqrt(problem.per_ut_power[k] / np.sum(np.abs(Z) ** 2))
    return W


def cdwmmse(problem, max_iter=50, tol=1e-3, chi=1.0, init="cdm", rng=None, keep_auxiliaries=False):
    """Alternating closed-form updates of ``D``, ``C`` and ``W``.

    Parameters
    ----------
    problem : BeamspaceProblem
    max_iter : int
        Iteration cap ``I_max``.
    tol : float
        Stop once ``sum_k beta_k log2(det E'_k / det E_k)`` falls below it.
    chi : float
        ``E_k`` is initialized to ``chi I`` for the first stopping test.
    init : {"cdm", "random"} or ndarray
        Starting precoders, normalized per UT.
    keep_auxiliaries : bool
        Store the last ``C_k`` and ``D_k`` in the result.

    Returns
    -------
    PrecoderSet
        The iterate with the best upper-bound sum rate after the per-satellite
        rescale.  ``trace[n]`` is that rate after ``n`` updates (``trace[0]``
        is the starting point) and ``n_iter`` the number of updates.
    """
    K, S, N, M = problem.n_ut, problem.n_sat, problem.n_rx, problem.streams
    L = (S * N + 1) * M
    Pt = problem.per_ut_power
    if isinstance(init, np.ndarray):
        W = check_finite_array(init, "init", dtype=complex,
                               shape=(K, problem.n_beams, M)).copy()
    elif init == "cdm":
        W = cdm_stacked(problem)
    elif init == "random":
        W = _random_init(problem, np.random.default_rng(rng))
    else:
        raise ValueError(f"unknown init {init!r}")
    sig_tilde = tilde_sigma_all(problem)
    serving = [problem.serving_beams(k) for k in range(K)]

    def rescaled(Wx):
        return rescale_satellite_power(Wx, problem.offsets, problem.tx_power)

    best_W = rescaled(W)
    best_rate = ubound_sum_rate_of(problem, best_W)
    trace = [best_rate]
    logdet_prev = np.full(K, L * np.log(chi))
    aux = None
    n = 0
    converged = False
    while n < max_iter:
        n += 1
        aux = auxiliaries(problem, W, sig_tilde)
        logdet = np.array([np.linalg.slogdet(E)[1] for E in aux["E"]])
        pack = gradient_pack(problem, aux["C"], aux["D"], sig_tilde)
        reg = beta_tilde(problem, aux["C"], aux["D"])
        W_new = np.zeros_like(W)
        for k in range(K):
            idx = serving[k]
            if idx.size == 0:
                continue
            W_new[k, idx], _, _ = solve_W(pack.xi(k, idx), pack.rhs(k, idx), reg[k], Pt[k])
        if not (np.all(np.isfinite(W_new)) and np.all(np.isfinite(logdet))):
            raise FloatingPointError(f"non-finite values at iteration {n}")
        W = W_new
        cand = rescaled(W)
        rate = ubound_sum_rate_of(problem, cand)
        trace.append(rate)
        if rate > best_rate:
            best_rate, best_W = rate, cand
        gain = float(problem.weights @ (logdet_prev - logdet)) / np.log(2.0)
        LOG.debug("iteration %d: gain %.3g bits", n, gain)
        logdet_prev = logdet
        if gain < tol:
            converged = True
            break
    LOG.debug("cdwmmse stopped after %d iterations (converged=%s)", n, converged)
    out = PrecoderSet(W=best_W, offsets=problem.offsets, tx_power=problem.tx_power, n_iter=n,
                      trace=trace, per_ut_power=Pt, converged=converged)
    if keep_auxiliaries and aux is not None:
        out.C, out.D = aux["C"], aux["D"]
    return out
