"""Beam-domain precoding problem data and the precoder container."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..beamspace import BeamCodebook, BeamPlan

LOG = logging.getLogger(__name__)

__all__ = ["BeamspaceProblem", "PrecoderSet", "build_problem", "rescale_satellite_power"]


@dataclass
class BeamspaceProblem:
    """Everything the precoders need, in beam-domain form.

    Beam-domain stacks concatenate the active beams of all satellites:
    satellite ``s`` owns columns ``offsets[s]:offsets[s+1]`` of ``vbar``
    and rows of the same range in every stacked precoder ``W[k]``.

    Attributes
    ----------
    vbar : (K, B_tot) complex
        ``vbar[k, block s] = v_{s,k}^T F_s A_s``.
    O : (S, K) int
        Association matrix.
    u, rho, rho_nlos, nlos_cov, mean_phase
        Statistical CSI arrays indexed ``[s, k]``.
    noise_power : (K,)
    tx_power : (S,)
        Per-satellite power budget ``P_s``.
    streams : int
        Streams per UT ``M``.
    weights : (K,)
        Rate weights ``beta_k``.
    """

    vbar: np.ndarray
    offsets: np.ndarray
    O: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    rho_nlos: np.ndarray
    nlos_cov: np.ndarray
    mean_phase: np.ndarray
    noise_power: np.ndarray
    tx_power: np.ndarray
    streams: int
    weights: np.ndarray = None
    gamma: np.ndarray = None
    kappa: np.ndarray = None
    _delta: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        S, K = self.O.shape
        if self.weights is None:
            self.weights = np.ones(K)
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (K,)).copy()
        self.tx_power = np.broadcast_to(np.asarray(self.tx_power, dtype=float), (S,)).copy()
        self.noise_power = np.broadcast_to(np.asarray(self.noise_power, dtype=float), (K,)).copy()
        self.offsets = np.asarray(self.offsets, dtype=int)
        if self.vbar.shape != (K, self.offsets[-1]):
            raise ValueError("vbar must have shape (K, total active beams)")
        if np.any(self.noise_power <= 0):
            raise ValueError("noise power must be positive")
        if self.streams < 1 or self.streams > self.n_rx:
            raise ValueError(f"streams must lie in [1, N_R={self.n_rx}]")

    @property
    def n_sat(self):
        return self.O.shape[0]

    @property
    def n_ut(self):
        return self.O.shape[1]

    @property
    def n_rx(self):
        return self.u.shape[-1]

    @property
    def n_beams(self):
        return int(self.offsets[-1])

    @property
    def per_ut_power(self):
        """Per-UT budget ``sum_s P_s / K``."""
        return np.full(self.n_ut, self.tx_power.sum() / self.n_ut)

    def block(self, s):
        return slice(int(self.offsets[s]), int(self.offsets[s + 1]))

    def serving_beams(self, k):
        """Indices into the beam stack of the satellites serving UT ``k``."""
        return np.concatenate([np.arange(self.offsets[s], self.offsets[s + 1])
                               for s in np.flatnonzero(self.O[:, k])]).astype(int)

    @property
    def delta(self):
        """``Delta[k, s1, s2]`` (K, S, S, N_R, N_R), computed once."""
        if self._delta is None:
            from .covariance import delta_tensor
            self._delta = delta_tensor(self)
        return self._delta

    def with_power(self, tx_power):
        out = BeamspaceProblem(self.vbar, self.offsets, self.O, self.u, self.rho, self.rho_nlos,
                               self.nlos_cov, self.mean_phase, self.noise_power, tx_power,
                               self.streams, self.weights, self.gamma, self.kappa)
        out._delta = self._delta
        return out


def build_problem(table, association, plans, codebooks, tx_power, streams, weights=None):
    """Assemble a :class:`BeamspaceProblem` from statistical CSI and a beam plan."""
    S, K = table.n_sat, table.n_ut
    if isinstance(codebooks, BeamCodebook):
        codebooks = [codebooks] * S
    if isinstance(plans, BeamPlan):
        plans = [plans] * S
    if len(plans) != S or len(codebooks) != S:
        raise ValueError("need one beam plan and one codebook per satellite")
    sizes = [len(p) for p in plans]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    v = table.v
    vbar = np.empty((K, offsets[-1]), dtype=complex)
    for s in range(S):
        idx = plans[s].indices
        if idx.size and idx.max() >= codebooks[s].size:
            raise IndexError(f"beam index out of range for satellite {s}")
        vbar[:, offsets[s]:offsets[s + 1]] = v[s] @ codebooks[s].F[:, idx]
    return BeamspaceProblem(
        vbar=vbar, offsets=offsets, O=np.asarray(association.O, dtype=int), u=table.u,
        rho=table.rho_los, rho_nlos=table.rho_nlos, nlos_cov=table.nlos_cov,
        mean_phase=table.mean_phase, noise_power=table.noise_power, tx_power=tx_power,
        streams=int(streams), weights=weights, gamma=table.gamma, kappa=table.kappa)


@dataclass
class PrecoderSet:
    """Stacked beam-domain precoders ``W[k]`` (B_tot x M) for every UT.

    ``W[k][block s]`` is ``W_{s,k}``.  ``C``/``D`` hold the auxiliaries of
    iterative designs; ``trace`` the per-iteration upper-bound sum rate.
    """

    W: np.ndarray
    offsets: np.ndarray
    tx_power: np.ndarray
    n_iter: int = 0
    trace: list = field(default_factory=list)
    C: list = None
    D: list = None
    per_ut_power: np.ndarray = None
    converged: bool = False

    def block(self, s, k):
        return self.W[k, self.offsets[s]:self.offsets[s + 1]]

    def satellite_power(self):
        return np.array([np.sum(np.abs(self.W[:, self.offsets[s]:self.offsets[s + 1]]) ** 2)
                         for s in range(len(self.offsets) - 1)])

    def check_power(self, rtol=1e-9):
        """Raise ``AssertionError`` unless every satellite meets its budget."""
        p = self.satellite_power()
        bad = np.flatnonzero(p > self.tx_power * (1 + rtol))
        assert bad.size == 0, f"satellites {bad.tolist()} exceed their power budget"


def rescale_satellite_power(W, offsets, tx_power, exact=False):
    """Scale each satellite's blocks to meet ``P_s``.

    With ``exact=False`` a satellite is only scaled down; with ``exact=True``
    it is scaled to use exactly ``P_s``.
    """
    W = np.array(W, copy=True)
    for s in range(len(offsets) - 1):
        blk = slice(int(offsets[s]), int(offsets[s + 1]))
        p = np.sum(np.abs(W[:, blk]) ** 2)
        if p <= 0:
            continue
        scale = np.sqrt(tx_power[s] / p)
        if not exact:
            scale = min(scale, 1.0)
        W[:, blk] *= scale
    return W
