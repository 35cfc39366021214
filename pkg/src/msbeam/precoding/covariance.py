"""Statistical covariances, their square-root factor and the D/C/E updates.

Notation: ``qH[s, j, k] = o_{s,j} vbar_{s,k}^T W_{s,j}`` is the 1 x M row
through which UT ``j``'s precoder on satellite ``s`` reaches UT ``k``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

LOG = logging.getLogger(__name__)

__all__ = [
    "CovPair",
    "compute_delta",
    "delta_tensor",
    "tilde_sigma",
    "q_vectors",
    "assemble_cov",
    "sqrt_sig",
    "update_D",
    "update_C",
    "mse_matrix",
    "p3_objective",
    "ubound_rates",
]


@dataclass
class CovPair:
    """Statistical signal and interference-plus-noise covariances of one UT."""

    R_sig: np.ndarray
    R_other: np.ndarray
    R_sig_sqrt: np.ndarray = None


def compute_delta(rho1, u1, phibar1, rho2=None, u2=None, phibar2=None, rho_nlos=0.0, nlos_cov=None):
    """Cross-satellite channel correlation ``Delta_{s1,s2,k}``.

    Called with only the first link it returns the diagonal term
    ``rho u u^H + rho_nlos Sigma``; with a second link the off-diagonal
    ``sqrt(rho1 rho2) phibar1 conj(phibar2) u1 u2^H``.
    """
    u1 = np.asarray(u1, dtype=complex)
    if u2 is None:
        out = rho1 * np.outer(u1, u1.conj())
        if nlos_cov is not None:
            out = out + rho_nlos * np.asarray(nlos_cov)
        return out
    u2 = np.asarray(u2, dtype=complex)
    return np.sqrt(rho1 * rho2) * phibar1 * np.conj(phibar2) * np.outer(u1, u2.conj())


def delta_tensor(problem):
    """``Delta[k, s1, s2]`` for every UT, shape (K, S, S, N_R, N_R)."""
    u = np.swapaxes(problem.u, 0, 1)                      # (K, S, N)
    a = (np.sqrt(problem.rho) * problem.mean_phase).T     # (K, S)
    au = a[..., None] * u
    delta = np.einsum("ksa,ktb->kstab", au, au.conj())
    S = problem.n_sat
    diag = (problem.rho.T[..., None, None] * np.einsum("ksa,ksb->ksab", u, u.conj())
            + problem.rho_nlos.T[..., None, None] * np.swapaxes(problem.nlos_cov, 0, 1))
    delta[:, np.arange(S), np.arange(S)] = diag
    return delta


def tilde_sigma(rho, u, phibar, rho_nlos, nlos_cov):
    """Lower-triangular ``Sigma~`` with ``Sigma~ Sigma~^H = (1-|phibar|^2) rho u u^H + rho_nlos Sigma``.

    Falls back to an eigenvalue-clipped factor (with a warning) when the
    matrix is numerically indefinite.
    """
    u = np.asarray(u, dtype=complex)
    A = (1.0 - abs(phibar) ** 2) * rho * np.outer(u, u.conj()) + rho_nlos * np.asarray(nlos_cov)
    A = 0.5 * (A + A.conj().T)
    scale = np.trace(A).real
    if scale <= 0:
        return np.zeros_like(A)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(A)
    if w.min() < -1e-10 * scale:
        LOG.warning("incoherent covariance is indefinite (min eig %.3g); clipping", w.min())
    w = np.clip(w, 0.0, None)
    # QR of the square-root factor gives a triangular factor of the same product
    B = (V * np.sqrt(w)).conj().T
    _, R = np.linalg.qr(B)
    return R.conj().T


def tilde_sigma_all(problem):
    """``Sigma~[s, k]`` for every link, shape (S, K, N_R, N_R)."""
    S, K = problem.n_sat, problem.n_ut
    out = np.zeros((S, K, problem.n_rx, problem.n_rx), dtype=complex)
    for s in range(S):
        for k in range(K):
            out[s, k] = tilde_sigma(problem.rho[s, k], problem.u[s, k], problem.mean_phase[s, k],
                                    problem.rho_nlos[s, k], problem.nlos_cov[s, k])
    return out


def q_vectors(problem, W):
    """``qH[s, j, k]`` for all satellites and UT pairs, shape (S, K, K, M)."""
    S = problem.n_sat
    qH = np.empty((S, problem.n_ut, problem.n_ut, W.shape[-1]), dtype=complex)
    for s in range(S):
        blk = problem.block(s)
        qH[s] = np.einsum("kb,jbm->jkm", problem.vbar[:, blk], W[:, blk])
    return qH * problem.O[:, :, None, None]


def assemble_cov(problem, W, qH=None):
    """Statistical ``R_sig`` and ``R_other`` for every UT.

    Returns arrays of shape (K, N_R, N_R).  Interference uses only the
    same-satellite terms; cross-satellite terms average out.
    """
    if qH is None:
        qH = q_vectors(problem, W)
    K = problem.n_ut
    ks = np.arange(K)
    delta = problem.delta
    own = qH[:, ks, ks]                                       # (S, K, M)
    coef = np.einsum("skm,tkm->kst", own, own.conj())         # q_{s}^H q_{t}
    R_sig = np.einsum("kst,kstab->kab", coef, delta)
    pw = np.sum(np.abs(qH) ** 2, axis=-1)                     # (S, J, K)
    pw[:, ks, ks] = 0.0
    dd = delta[:, np.arange(problem.n_sat), np.arange(problem.n_sat)]  # (K, S, N, N)
    R_other = np.einsum("sk,ksab->kab", pw.sum(axis=1), dd)
    R_other = R_other + problem.noise_power[:, None, None] * np.eye(problem.n_rx)
    return _herm(R_sig), _herm(R_other)


def sqrt_sig(problem, W, sig_tilde, qH=None):
    """Square-root factor ``R_sig^{1/2}`` of every UT, shape (K, N_R, L).

    ``L = (S N_R + 1) M``.  Columns are ordered as one LoS block followed by
    ``N_R`` blocks of ``M`` columns for each satellite; block ``n`` of
    satellite ``s`` is ``sigma~_{s,n} q_s^H`` with ``sigma~_{s,n}`` column
    ``n`` of ``Sigma~_{s,k}``.
    """
    if qH is None:
        qH = q_vectors(problem, W)
    S, K, N = problem.n_sat, problem.n_ut, problem.n_rx
    M = qH.shape[-1]
    ks = np.arange(K)
    own = np.swapaxes(qH[:, ks, ks], 0, 1)                     # (K, S, M)
    a = (problem.mean_phase * np.sqrt(problem.rho)).T          # (K, S)
    u = np.swapaxes(problem.u, 0, 1)                           # (K, S, N)
    los = np.einsum("ks,ksa,ksm->kam", a, u, own)
    st = np.swapaxes(sig_tilde, 0, 1)                          # (K, S, N, N)
    rest = np.einsum("ksan,ksm->kasnm", st, own).reshape(K, N, S * N * M)
    return np.concatenate([los, rest], axis=-1)


def _herm(A):
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def _pd_solve(A, B):
    """Solve ``A X = B`` for Hermitian positive definite ``A``."""
    try:
        c = sla.cho_factor(A, lower=True, check_finite=False)
        return sla.cho_solve(c, B, check_finite=False)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(A).real
        LOG.info("singular covariance; regularizing with %.3g", jitter)
        return sla.solve(A + jitter * np.eye(A.shape[0]), B, assume_a="her")


def update_D(R_sig, R_other, R_half):
    """Optimal receive-side auxiliary ``(R_sig + R_other)^{-1} R_sig^{1/2}``."""
    return _pd_solve(R_sig + R_other, R_half)


def mse_matrix(D, R_sig, R_other, R_half):
    """``E = D^H (R_sig + R_other) D - D^H R^{1/2} - R^{1/2 H} D + I`` for any ``D``."""
    DH = D.conj().T
    cross = DH @ R_half
    E = DH @ (R_sig + R_other) @ D - cross - cross.conj().T + np.eye(D.shape[1])
    return _herm(E)


def update_C(R_sig, R_other, R_half, D=None):
    """Optimal weight ``C = I + R^{1/2 H} R_other^{-1} R^{1/2}`` and the matching ``E``.

    ``E`` is evaluated from its definition with ``D`` (the optimal ``D`` when
    omitted), so that ``C E = I`` holds at the optimum.
    """
    if D is None:
        D = update_D(R_sig, R_other, R_half)
    L = R_half.shape[1]
    C = np.eye(L) + R_half.conj().T @ _pd_solve(R_other, R_half)
    return _herm(C), mse_matrix(D, R_sig, R_other, R_half)


def p3_objective(C, E):
    """``Tr(C E) - ln det C`` of one UT."""
    sign, logdet = np.linalg.slogdet(C)
    if sign.real <= 0:
        raise FloatingPointError("weight matrix C is not positive definite")
    return float(np.trace(C @ E).real - logdet)


def ubound_rates(R_sig, R_other):
    """Per-UT ``log2 det(I + R_other^{-1} R_sig)`` for stacked covariances."""
    _, ld_all = np.linalg.slogdet(R_sig + R_other)
    _, ld_o = np.linalg.slogdet(R_other)
    return np.maximum((ld_all - ld_o) / np.log(2.0), 0.0)
