"""Steering vectors, Rician channel sampling and statistical CSI.

A single satellite-to-UT channel is the rank-one outer product
``H = ubar v^T`` where ``v`` is the transmit UPA steering vector and

    ubar = sqrt(rho) * u + sqrt(rho_nlos) * utilde,   utilde ~ CN(0, Sigma)

with ``rho = kappa*gamma/(kappa+1)`` (LoS power), ``rho_nlos = gamma/(kappa+1)``
(NLoS power) and ``Sigma`` normalised to unit trace, so that
``E{tr(H H^H)} = gamma``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

LOG = logging.getLogger(__name__)

__all__ = [
    "SCSI",
    "ScsiTable",
    "ChannelSample",
    "steering_1d",
    "upa_steering",
    "sample_channel",
    "sample_phase",
    "estimate_scsi",
    "sample_receive_vectors",
]

NLOS_CONVENTIONS = ("normalized", "literal")


def steering_1d(N, x):
    """Uniform linear array response ``(1/sqrt(N)) exp(-j*pi*m*x)``, m = 0..N-1.

    ``x`` may be an array; the element axis is appended last.
    """
    if N < 1:
        raise ValueError(f"array size must be >= 1, got {N}")
    x = np.asarray(x, dtype=float)
    m = np.arange(N)
    return np.exp(-1j * np.pi * np.multiply.outer(x, m)) / np.sqrt(N)


def upa_steering(theta, phi, n_v, n_h):
    """UPA response ``v_{n_v}(cos theta) kron v_{n_h}(sin theta cos phi)``.

    Broadcasts over leading dimensions of ``theta``/``phi``; the element axis
    (length ``n_v*n_h``, vertical index major) is last.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    a_v = steering_1d(n_v, np.cos(theta))
    a_h = steering_1d(n_h, np.sin(theta) * np.cos(phi))
    out = a_v[..., :, None] * a_h[..., None, :]
    return out.reshape(out.shape[:-2] + (n_v * n_h,))


@dataclass
class SCSI:
    """Statistical CSI of one satellite-UT link.

    Attributes
    ----------
    gamma : float
        Average channel power ``E{tr(H H^H)}``.
    kappa : float
        Rician factor (``np.inf`` for a pure LoS link).
    angles : ndarray of shape (4,)
        ``[theta_t, phi_t, theta_r, phi_r]`` in radians.
    nlos_cov : ndarray of shape (N_R, N_R)
        Unit-trace Hermitian PSD covariance of the NLoS receive vector.
    mean_phase : complex
        Mean of the synchronisation phase error, ``|mean_phase| <= 1``.
    tx_shape, rx_shape : tuple of int
        ``(N_V, N_H)`` of the transmit and receive arrays.
    """

    gamma: float
    kappa: float
    angles: np.ndarray
    nlos_cov: np.ndarray
    mean_phase: complex = 1.0
    tx_shape: tuple = (1, 1)
    rx_shape: tuple = (1, 1)

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.nlos_cov = np.asarray(self.nlos_cov, dtype=complex)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if abs(self.mean_phase) > 1 + 1e-12:
            raise ValueError(f"|mean_phase| must be <= 1, got {abs(self.mean_phase)}")

    @property
    def rho_los(self):
        return los_power(self.gamma, self.kappa)

    @property
    def rho_nlos(self):
        return nlos_power(self.gamma, self.kappa)

    @property
    def u(self):
        return upa_steering(self.angles[2], self.angles[3], *self.rx_shape)

    @property
    def v(self):
        return upa_steering(self.angles[0], self.angles[1], *self.tx_shape)


def los_power(gamma, kappa):
    gamma = np.asarray(gamma, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(kappa), gamma, kappa * gamma / (kappa + 1.0))
    return out[()] if out.ndim == 0 else out


def nlos_power(gamma, kappa):
    gamma = np.asarray(gamma, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.isinf(kappa), 0.0, gamma / (kappa + 1.0))
    return out[()] if out.ndim == 0 else out


@dataclass
class ScsiTable:
    """Statistical CSI for every (satellite, UT) pair, arrays indexed ``[s, k]``.

    ``nlos_convention`` picks the NLoS power: ``"normalized"`` gives
    ``gamma/(kappa+1)``, ``"literal"`` the ``gamma*kappa/(kappa+1)``.
    Both the statistical model and the channel sampler follow it.
    """

    gamma: np.ndarray
    kappa: np.ndarray
    angles: np.ndarray
    nlos_cov: np.ndarray
    mean_phase: np.ndarray
    tx_shape: tuple
    rx_shape: tuple
    noise_power: np.ndarray = field(default=None)
    nlos_convention: str = "normalized"

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.kappa = np.asarray(self.kappa, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        self.nlos_cov = np.asarray(self.nlos_cov, dtype=complex)
        self.mean_phase = np.asarray(self.mean_phase, dtype=complex)
        S, K = self.gamma.shape
        n_r = self.n_rx
        if self.kappa.shape != (S, K) or self.mean_phase.shape != (S, K):
            raise ValueError("kappa and mean_phase must have shape (S, K)")
        if self.angles.shape != (S, K, 4):
            raise ValueError(f"angles must have shape {(S, K, 4)}, got {self.angles.shape}")
        if self.nlos_cov.shape != (S, K, n_r, n_r):
            raise ValueError(f"nlos_cov must have shape {(S, K, n_r, n_r)}")
        if np.any(self.gamma <= 0) or np.any(self.kappa < 0):
            raise ValueError("gamma must be positive and kappa nonnegative")
        if self.noise_power is None:
            self.noise_power = np.ones(K)
        self.noise_power = np.broadcast_to(np.asarray(self.noise_power, dtype=float), (K,)).copy()
        if self.nlos_convention not in NLOS_CONVENTIONS:
            raise ValueError(f"unknown NLoS convention {self.nlos_convention!r}; "
                             f"expected one of {NLOS_CONVENTIONS}")

    @property
    def n_sat(self):
        return self.gamma.shape[0]

    @property
    def n_ut(self):
        return self.gamma.shape[1]

    @property
    def n_tx(self):
        return int(np.prod(self.tx_shape))

    @property
    def n_rx(self):
        return int(np.prod(self.rx_shape))

    @property
    def rho_los(self):
        return los_power(self.gamma, self.kappa)

    @property
    def rho_nlos(self):
        return _nlos_amplitude(self.gamma, self.kappa, self.nlos_convention) ** 2

    @cached_property
    def u(self):
        """Receive steering vectors, shape (S, K, N_R)."""
        return upa_steering(self.angles[..., 2], self.angles[..., 3], *self.rx_shape)

    @cached_property
    def v(self):
        """Transmit steering vectors, shape (S, K, N_T)."""
        return upa_steering(self.angles[..., 0], self.angles[..., 1], *self.tx_shape)

    def pair(self, s, k):
        return SCSI(
            gamma=float(self.gamma[s, k]),
            kappa=float(self.kappa[s, k]),
            angles=self.angles[s, k],
            nlos_cov=self.nlos_cov[s, k],
            mean_phase=complex(self.mean_phase[s, k]),
            tx_shape=tuple(self.tx_shape),
            rx_shape=tuple(self.rx_shape),
        )

    def with_noise(self, noise_power):
        return ScsiTable(self.gamma, self.kappa, self.angles, self.nlos_cov,
                         self.mean_phase, self.tx_shape, self.rx_shape, noise_power,
                         self.nlos_convention)


@dataclass
class ChannelSample:
    """One realisation of a satellite-UT channel and its phase error."""

    ubar: np.ndarray
    v: np.ndarray
    phase: complex = 1.0

    @property
    def H(self):
        return np.outer(self.ubar, self.v)


def _psd_factor(cov):
    """Return ``L`` with ``L L^H = cov``; Cholesky with eigen fallback."""
    cov = np.asarray(cov, dtype=complex)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(0.5 * (cov + cov.conj().T))
        scale = max(float(np.max(np.abs(w))), 1e-300)
        if w.min() < -1e-10 * scale:
            raise np.linalg.LinAlgError("covariance is not positive semidefinite")
        return U * np.sqrt(np.clip(w, 0.0, None))


def _nlos_amplitude(gamma, kappa, convention):
    if convention == "normalized":
        return np.sqrt(nlos_power(gamma, kappa))
    if convention == "literal":
        # coefficient sqrt(kappa/(kappa+1)) on a sqrt(gamma)-scaled vector
        gamma = np.asarray(gamma, dtype=float)
        kappa = np.asarray(kappa, dtype=float)
        with np.errstate(invalid="ignore"):
            frac = np.where(np.isinf(kappa), 1.0, kappa / (kappa + 1.0))
        return np.sqrt(gamma * frac)
    raise ValueError(f"unknown NLoS convention {convention!r}; expected one of {NLOS_CONVENTIONS}")


def sample_phase(zeta2, rng, size=None):
    """Draw phase errors ``exp(j*rho)`` with ``rho ~ N(0, zeta2)``."""
    if np.any(np.asarray(zeta2) < 0):
        raise ValueError("phase error variance must be >= 0")
    rho = rng.normal(0.0, 1.0, size=size) * np.sqrt(zeta2)
    return np.exp(1j * rho)


def sample_channel(scsi, rng, zeta2=0.0, nlos_convention="normalized"):
    """Draw one :class:`ChannelSample` for a single link."""
    n_r = int(np.prod(scsi.rx_shape))
    L = _psd_factor(scsi.nlos_cov)
    w = (rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r)) / np.sqrt(2.0)
    ubar = np.sqrt(scsi.rho_los) * scsi.u + _nlos_amplitude(scsi.gamma, scsi.kappa, nlos_convention) * (L @ w)
    return ChannelSample(ubar=ubar, v=scsi.v, phase=complex(sample_phase(zeta2, rng)))


def sample_receive_vectors(table, rng, n_trials, nlos_convention=None):
    """Vectorised draw of the receive-side channel vectors.

    ``nlos_convention`` defaults to the table's own.

    Returns ``ubar`` of shape (n_trials, S, K, N_R); the full channel of pair
    ``(s, k)`` in trial ``t`` is ``outer(ubar[t, s, k], table.v[s, k])``.
    """
    S, K, n_r = table.n_sat, table.n_ut, table.n_rx
    factors = np.empty((S, K, n_r, n_r), dtype=complex)
    for s in range(S):
        for k in range(K):
            factors[s, k] = _psd_factor(table.nlos_cov[s, k])
    w = (rng.standard_normal((n_trials, S, K, n_r))
         + 1j * rng.standard_normal((n_trials, S, K, n_r))) / np.sqrt(2.0)
    nlos = np.einsum("skij,tskj->tski", factors, w)
    if nlos_convention is None:
        nlos_convention = table.nlos_convention
    amp_nlos = _nlos_amplitude(table.gamma, table.kappa, nlos_convention)
    los = np.sqrt(table.rho_los)[..., None] * table.u
    return los[None] + amp_nlos[None, ..., None] * nlos


def estimate_scsi(samples, angles, tx_shape, rx_shape):
    """Moment estimate of the statistical CSI of one link from channel samples.

    ``gamma`` is the mean of ``tr(H H^H)``; the LoS power is the squared
    projection of the mean receive vector onto the LoS direction; the NLoS
    covariance is the sample covariance of what remains after removing that
    projection.
    """
    if len(samples) < 2:
        raise ValueError("need at least two channel samples")
    angles = np.asarray(angles, dtype=float)
    u = upa_steering(angles[2], angles[3], *rx_shape)
    v = upa_steering(angles[0], angles[1], *tx_shape)
    H = np.stack([np.asarray(smp.H) for smp in samples])
    gamma = float(np.mean(np.sum(np.abs(H) ** 2, axis=(1, 2))))
    # H = ubar v^T with unit-norm v
    ubar = H @ v.conj()
    mean_u = ubar.mean(axis=0)
    los_amp = np.vdot(u, mean_u)
    rho_los = float(abs(los_amp) ** 2)
    resid = ubar - np.outer(np.ones(len(samples)), u * los_amp)
    cov = np.einsum("ti,tj->ij", resid, resid.conj()) / len(samples)
    cov = 0.5 * (cov + cov.conj().T)
    w, U = np.linalg.eigh(cov)
    if w.min() < -1e-10 * max(abs(w).max(), 1e-300):
        warnings.warn("NLoS covariance estimate has negative eigenvalues; clipped to zero")
    cov = (U * np.clip(w, 0.0, None)) @ U.conj().T
    rho_nlos = float(np.real(np.trace(cov)))
    if rho_nlos <= 1e-10 * gamma:
        nlos_cov = np.zeros_like(cov)
        kappa = np.inf
    else:
        nlos_cov = cov / rho_nlos
        kappa = rho_los / rho_nlos
    phases = np.array([smp.phase for smp in samples])
    return SCSI(gamma=gamma, kappa=kappa, angles=angles, nlos_cov=nlos_cov,
                mean_phase=complex(phases.mean()), tx_shape=tuple(tx_shape),
                rx_shape=tuple(rx_shape))
