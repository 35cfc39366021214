"""Monte-Carlo ergodic rates and the statistical upper-bound rate."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import sample_receive_vectors
from .precoding.covariance import assemble_cov, q_vectors, ubound_rates

LOG = logging.getLogger(__name__)

__all__ = [
    "RateReport",
    "phase_variance",
    "sample_phases",
    "draw_samples",
    "instantaneous_rates",
    "antenna_domain_rates",
    "mc_sum_rate",
    "ubound_sum_rate",
]


@dataclass
class RateReport:
    """Per-UT ergodic and upper-bound rates in bit/s/Hz.

    ``per_trial`` keeps the (trials, K) instantaneous rates when available.
    """

    rate_mc: np.ndarray
    stderr: np.ndarray
    rate_ubound: np.ndarray
    weights: np.ndarray
    trials: int
    per_trial: np.ndarray = None

    @property
    def sum_mc(self):
        return float(self.weights @ self.rate_mc)

    @property
    def sum_ubound(self):
        return float(self.weights @ self.rate_ubound)

    @property
    def sum_stderr(self):
        if self.per_trial is None or self.trials < 2:
            return float(np.sqrt(np.sum((self.weights * self.stderr) ** 2)))
        tot = self.per_trial @ self.weights
        return float(tot.std(ddof=1) / np.sqrt(self.trials))


def phase_variance(mean_phase):
    """Gaussian phase-error variance ``zeta^2`` with ``|E exp(j rho)| = |mean_phase|``."""
    m = np.abs(np.asarray(mean_phase))
    if np.any(m > 1 + 1e-12):
        raise ValueError("|mean_phase| cannot exceed 1")
    with np.errstate(divide="ignore"):
        return -2.0 * np.log(np.clip(m, 0.0, 1.0))


def sample_phases(mean_phase, rng, size=()):
    """Phase errors ``exp(j(arg mean_phase + rho))``, ``rho ~ N(0, zeta^2)``.

    A zero mean gives a uniform phase.  Output shape is ``size + mean_phase.shape``.
    """
    mean_phase = np.asarray(mean_phase, dtype=complex)
    size = tuple(np.atleast_1d(size)) if np.ndim(size) else ((size,) if size != () else ())
    z2 = phase_variance(mean_phase)
    shape = size + mean_phase.shape
    g = rng.standard_normal(shape)
    uni = rng.uniform(-np.pi, np.pi, shape)
    finite = np.isfinite(z2)
    rho = np.where(finite, g * np.sqrt(np.where(finite, z2, 0.0)), uni)
    return np.exp(1j * (np.angle(mean_phase) + rho))


def draw_samples(table, rng, trials, nlos_convention=None):
    """Receive vectors (trials, S, K, N_R) and phases (trials, S, K)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ubar = sample_receive_vectors(table, rng, trials, nlos_convention)
    phase = sample_phases(table.mean_phase, rng, trials)
    return ubar, phase


def _logdet_rate(Rs, Ro):
    _, a = np.linalg.slogdet(Rs + Ro)
    _, b = np.linalg.slogdet(Ro)
    r = (a - b) / np.log(2.0)
    assert np.all(np.isfinite(r)), "non-finite log-det rate"
    return np.maximum(r, 0.0)


def instantaneous_rates(problem, W, ubar, phase, cross_phase=None):
    """Per-trial, per-UT rates ``log2 det(I + R_other^{-1} R_sig)``, shape (T, K).

    The beam-domain channel of link ``(s, k)`` is ``ubar vbar_{s,k}^T``, so
    the effective signal of UT ``k`` is ``sum_s phase ubar q_{s,k,k}^H``.
    Interference keeps only same-satellite terms unless ``cross_phase``
    (T, S, K, K) supplies independent phases for the coherent sum.
    """
    qH = q_vectors(problem, W)
    K, N = problem.n_ut, problem.n_rx
    ks = np.arange(K)
    own = qH[:, ks, ks]                                             # (S, K, M)
    G = np.einsum("tsk,tska,skm->tkam", phase, ubar, own)
    Rs = G @ np.conj(np.swapaxes(G, -1, -2))
    noise = problem.noise_power[None, :, None, None] * np.eye(N)
    if cross_phase is None:
        pw = np.sum(np.abs(qH) ** 2, axis=-1)
        pw[:, ks, ks] = 0.0
        w = pw.sum(axis=1)                                          # (S, K)
        Ro = np.einsum("sk,tska,tskb->tkab", w, ubar, ubar.conj()) + noise
    else:
        Gi = np.einsum("tsjk,tska,sjkm->tkjam", cross_phase, ubar, qH)
        Gi[:, ks, ks] = 0.0
        Ro = np.einsum("tkjam,tkjbm->tkab", Gi, Gi.conj()) + noise
    return _logdet_rate(Rs, Ro)


def antenna_domain_rates(X, H, phase, O, noise_power):
    """Per-trial rates from explicit antenna-domain channels and precoders.

    Parameters
    ----------
    X : (S, K, N_T, M) antenna-domain precoders ``F_s A_s W_{s,k}``
    H : (T, S, K, N_R, N_T) channels
    phase : (T, S, K)
    O : (S, K) association
    noise_power : (K,)
    """
    HX = np.einsum("tskan,sjnm->tskjam", H, X)                     # UT k hears UT j's precoder
    T, S, K, N = H.shape[:4]
    ks = np.arange(K)
    sig = np.einsum("tsk,sk,tskam->tkam", phase, O, HX[:, :, ks, ks])
    Rs = sig @ np.conj(np.swapaxes(sig, -1, -2))
    Ro = np.zeros((T, K, N, N), dtype=complex)
    for k in range(K):
        for j in range(K):
            if j == k:
                continue
            for s in range(S):
                if O[s, j]:
                    A = HX[:, s, k, j]
                    Ro[:, k] += A @ np.conj(np.swapaxes(A, -1, -2))
    Ro += np.asarray(noise_power)[None, :, None, None] * np.eye(N)
    return _logdet_rate(Rs, Ro)


def mc_sum_rate(precoders, problem, table, trials=500, rng=None, cross_terms=False,
                samples=None, chunk=256):
    """Monte-Carlo ergodic rates of a precoder set.

    Parameters
    ----------
    precoders : PrecoderSet or ndarray (K, B_tot, M)
    problem : BeamspaceProblem
    table : ScsiTable
        Source of the channel statistics the samples are drawn from.
    trials : int
    rng : Generator or seed
    cross_terms : bool
        Keep coherent cross-satellite interference terms with independent phases.
    samples : (ubar, phase), optional
        Pre-drawn samples, so several precoders can share channel draws.
    """
    W = getattr(precoders, "W", precoders)
    rng = np.random.default_rng(rng)
    if samples is None:
        samples = draw_samples(table, rng, trials)
    ubar, phase = samples
    T = ubar.shape[0]
    out = []
    for lo in range(0, T, chunk):
        sl = slice(lo, lo + chunk)
        cp = None
        if cross_terms:
            n = ubar[sl].shape[0]
            S, K = problem.n_sat, problem.n_ut
            cp = sample_phases(np.broadcast_to(table.mean_phase[:, None, :], (S, K, K)), rng, n)
        out.append(instantaneous_rates(problem, W, ubar[sl], phase[sl], cp))
    per_trial = np.concatenate(out, axis=0)
    mean = per_trial.mean(axis=0)
    se = per_trial.std(axis=0, ddof=1) / np.sqrt(T) if T > 1 else np.zeros_like(mean)
    return RateReport(rate_mc=mean, stderr=se, rate_ubound=ubound_sum_rate(W, problem).rate_ubound,
                      weights=problem.weights, trials=T, per_trial=per_trial)


def ubound_sum_rate(precoders, problem):
    """Deterministic upper-bound rates from the statistical covariances."""
    W = getattr(precoders, "W", precoders)
    Rs, Ro = assemble_cov(problem, W)
    r = ubound_rates(Rs, Ro)
    return RateReport(rate_mc=np.full_like(r, np.nan), stderr=np.zeros_like(r), rate_ubound=r,
                      weights=problem.weights, trials=0)
