"""Gradient blocks of the per-UT precoder subproblem and its closed-form solution.

For fixed auxiliaries ``C_k``, ``D_k`` the quadratic part of the per-UT
objective has gradient ``Xi_k W_k`` and the linear part ``Vb_k^H T_k``,
where ``Vb_k`` stacks ``o_{s,k} vbar_{s,k}^T`` block-diagonally (S x B_tot).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

LOG = logging.getLogger(__name__)

__all__ = ["GradientPack", "gradient_pack", "beta_tilde", "solve_W", "lagrangian_residual"]


@dataclass
class GradientPack:
    """``Psi_k`` (K, S, S), ``T_k`` (K, S, M) and the weights that build ``Xi_k``.

    ``Xi_k`` and ``Vb_k^H T_k`` are formed on demand, optionally restricted
    to a subset of beam-stack indices (the beams of the serving satellites).
    """

    problem: object
    psi: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        pb = self.problem
        S = pb.n_sat
        diag = self.psi[:, np.arange(S), np.arange(S)].real   # (K, S)
        w = pb.weights[:, None] * diag
        # per-satellite sum over all UTs j of beta_j psi_{s,s,j} vbar* vbar^T
        self._interf = []
        for s in range(S):
            vb = pb.vbar[:, pb.block(s)]
            self._interf.append(np.einsum("j,ja,jb->ab", w[:, s], vb.conj(), vb))
        self._w = w

    def vbreve(self, k):
        """``Vb_k`` (S x B_tot)."""
        pb = self.problem
        V = np.zeros((pb.n_sat, pb.n_beams), dtype=complex)
        for s in range(pb.n_sat):
            if pb.O[s, k]:
                V[s, pb.block(s)] = pb.vbar[k, pb.block(s)]
        return V

    def xi(self, k, idx=None):
        """``Xi_k`` restricted to beam-stack indices ``idx`` (all when None)."""
        pb = self.problem
        V = self.vbreve(k)
        Xi = pb.weights[k] * (V.conj().T @ self.psi[k] @ V)
        for s in range(pb.n_sat):
            if not pb.O[s, k]:
                continue
            blk = pb.block(s)
            vk = pb.vbar[k, blk]
            Xi[blk, blk] += self._interf[s] - self._w[k, s] * np.outer(vk.conj(), vk)
        Xi = 0.5 * (Xi + Xi.conj().T)
        if idx is not None:
            Xi = Xi[np.ix_(idx, idx)]
        return Xi

    def rhs(self, k, idx=None):
        """``Vb_k^H T_k`` (B_tot x M), optionally restricted to ``idx``."""
        out = self.vbreve(k).conj().T @ self.T[k]
        return out if idx is None else out[idx]


def _t_rows(problem, k, C, D, sig_tilde_k):
    """Rows ``t_{s,k}^T`` for all satellites, shape (S, M)."""
    S, N = problem.n_sat, problem.n_rx
    L = C.shape[0]
    M = L // (S * N + 1)
    DC = D @ C
    a = np.conj(problem.mean_phase[:, k]) * np.sqrt(problem.rho[:, k])
    t = a[:, None] * (problem.u[:, k].conj() @ DC[:, :M])
    blocks = DC[:, M:].reshape(N, S, N, M)
    # sum_n sigma_{s,n}^H D C~_{s,n}
    t += np.einsum("san,asnm->sm", sig_tilde_k.conj(), blocks)
    return t


def gradient_pack(problem, C, D, sig_tilde):
    """Gradient blocks for all UTs.

    Parameters
    ----------
    problem : BeamspaceProblem
    C, D : sequences of per-UT auxiliaries, ``C[k]`` (L x L), ``D[k]`` (N_R x L)
    sig_tilde : array (S, K, N_R, N_R)
        Incoherent covariance factors.
    """
    K, S = problem.n_ut, problem.n_sat
    delta = problem.delta
    psi = np.empty((K, S, S), dtype=complex)
    T = []
    for k in range(K):
        G = D[k] @ C[k] @ D[k].conj().T
        # psi[i, j] = Tr(G Delta_{j,i})
        psi[k] = np.einsum("ab,jiba->ij", G, delta[k])
        T.append(_t_rows(problem, k, C[k], D[k], sig_tilde[:, k]))
    psi = 0.5 * (psi + np.conj(np.swapaxes(psi, 1, 2)))
    return GradientPack(problem=problem, psi=psi, T=np.stack(T))


def beta_tilde(problem, C, D):
    """Regularizers ``beta_k sigma_k^2 Tr(D C D^H) / P~_k`` for all UTs."""
    tr = np.array([np.trace(D[k] @ C[k] @ D[k].conj().T).real for k in range(problem.n_ut)])
    return problem.weights * problem.noise_power * tr / problem.per_ut_power


def solve_W(Xi, rhs, reg, power):
    """Power-normalized solution of ``(Xi + reg I) W = rhs``.

    Returns ``(W, W_bar, eta)`` with ``W = eta W_bar`` and
    ``||W||_F^2 = power``.  An all-zero right-hand side shuts the UT off.
    """
    if not np.any(rhs):
        LOG.info("zero linear term; precoder set to zero")
        return np.zeros_like(rhs), np.zeros_like(rhs), 0.0
    A = Xi + reg * np.eye(Xi.shape[0])
    try:
        W_bar = sla.cho_solve(sla.cho_factor(A, lower=True, check_finite=False), rhs,
                              check_finite=False)
    except np.linalg.LinAlgError:
        W_bar = sla.solve(A, rhs, assume_a="her")
    nrm2 = np.sum(np.abs(W_bar) ** 2)
    eta = float(np.sqrt(power / nrm2))
    return eta * W_bar, W_bar, eta


def lagrangian_residual(Xi, rhs, W, W_bar, weight, reg, noise_term):
    """Relative stationarity residuals of the per-UT Lagrangian.

    The subproblem is ``min (Tr(W^H Xi W) + noise_term) / tau^2
    - 2 weight Re Tr(W^H rhs) / tau`` subject to ``||W||^2 <= P``.  The
    returned pair holds the W-gradient residual (relative to its terms) and
    the tau-gradient residual, evaluated at the implied ``tau`` and
    multiplier.
    """
    tau = np.linalg.norm(W) / (weight * np.linalg.norm(W_bar))
    lam = reg / tau ** 2
    a = Xi @ W / tau ** 2
    b = weight * rhs / tau
    c = lam * W
    r_w = np.linalg.norm(a - b + c) / (np.linalg.norm(a) + np.linalg.norm(b) + np.linalg.norm(c))
    quad = np.trace(W.conj().T @ Xi @ W).real + noise_term
    lin = weight * np.trace(W.conj().T @ rhs).real
    r_tau = abs(-2 * quad / tau ** 3 + 2 * lin / tau ** 2) / (2 * quad / tau ** 3 + 2 * abs(lin) / tau ** 2)
    return float(r_w), float(r_tau)
