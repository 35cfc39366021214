"""Non-iterative precoders: fixed-auxiliary closed form, location-based and single-beam."""
from __future__ import annotations

import numpy as np

from .gradients import GradientPack, solve_W
from .problem import PrecoderSet, rescale_satellite_power

__all__ = ["cdm_precoder", "lib_precoder", "dft_precoder", "cdm_stacked"]


def cdm_stacked(problem, streams=None):
    """Per-UT closed-form precoders before satellite rescaling, shape (K, B_tot, M).

    The receive auxiliary is fixed to ``[I 0]`` and the weight to
    ``diag(I, 0)``, which turns every ``psi`` into a trace of ``Delta`` and
    the linear term into the LoS rows ``conj(phibar) sqrt(rho) u^H``.  The
    solution has ``N_R`` columns; the first ``M`` are kept and renormalized.
    """
    M = problem.streams if streams is None else int(streams)
    K, N = problem.n_ut, problem.n_rx
    dtr = np.trace(problem.delta, axis1=-2, axis2=-1)          # (K, S, S)
    T = (np.conj(problem.mean_phase) * np.sqrt(problem.rho)).T[..., None] \
        * np.swapaxes(problem.u, 0, 1).conj()                   # (K, S, N)
    pack = GradientPack(problem=problem, psi=np.swapaxes(dtr, 1, 2), T=T)
    reg = problem.weights * problem.noise_power * N / problem.per_ut_power
    W = np.zeros((K, problem.n_beams, M), dtype=complex)
    for k in range(K):
        idx = problem.serving_beams(k)
        if idx.size == 0:
            continue
        _, W_bar, _ = solve_W(pack.xi(k, idx), pack.rhs(k, idx), reg[k], 1.0)
        Wk = W_bar[:, :M]
        nrm2 = np.sum(np.abs(Wk) ** 2)
        if nrm2 > 0:
            W[k, idx] = np.sqrt(problem.per_ut_power[k] / nrm2) * Wk
    return W


def cdm_precoder(problem, streams=None):
    """Closed-form precoder with satellite power rescaling."""
    W = cdm_stacked(problem, streams)
    return PrecoderSet(W=rescale_satellite_power(W, problem.offsets, problem.tx_power),
                       offsets=problem.offsets, tx_power=problem.tx_power,
                       per_ut_power=problem.per_ut_power)


def _round_robin(problem, column):
    """Fill one column per serving satellite, cycling the stream index."""
    K, M = problem.n_ut, problem.streams
    W = np.zeros((K, problem.n_beams, M), dtype=complex)
    for k in range(K):
        b = 0
        for s in range(problem.n_sat):
            if problem.O[s, k]:
                blk = problem.block(s)
                W[k, blk, b] = column(s, k, problem.vbar[k, blk])
                b = (b + 1) % M
    W = rescale_satellite_power(W, problem.offsets, problem.tx_power, exact=True)
    return PrecoderSet(W=W, offsets=problem.offsets, tx_power=problem.tx_power)


def lib_precoder(problem):
    """Location-based precoder: each serving satellite sends the conjugate beam-domain steering vector."""
    return _round_robin(problem, lambda s, k, vb: vb.conj())


def dft_precoder(problem):
    """One DFT beam per UT and serving satellite: the strongest active beam."""
    def column(s, k, vb):
        e = np.zeros(vb.shape, dtype=complex)
        if vb.size:
            e[int(np.argmax(np.abs(vb)))] = 1.0
        return e
    return _round_robin(problem, column)
