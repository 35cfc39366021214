"""DFT beam codebooks, beam-domain channels and closed-form beam gains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import steering_1d

__all__ = [
    "BeamCodebook",
    "BeamPlan",
    "dft_codebook",
    "identity_codebook",
    "effective_channel",
    "dirichlet_ratio",
    "beam_gain",
    "beam_gains",
]


@dataclass(frozen=True)
class BeamCodebook:
    """Beam codebook ``F`` (N_T x Q) with its beam-grid coordinates.

    For a DFT codebook column ``q = i_v*N_H + i_h`` points at the direction
    cosines ``(grid_v[q], grid_h[q])``.  ``grid_v``/``grid_h`` are ``None`` for
    codebooks that are not angular grids.
    """

    F: np.ndarray
    grid_v: np.ndarray = None
    grid_h: np.ndarray = None
    shape: tuple = None

    @property
    def n_tx(self):
        return self.F.shape[0]

    @property
    def size(self):
        return self.F.shape[1]


@dataclass(frozen=True)
class BeamPlan:
    """Ordered beam indices activated by one satellite."""

    selected: tuple

    def __post_init__(self):
        sel = tuple(int(q) for q in self.selected)
        if len(set(sel)) != len(sel):
            raise ValueError(f"beam indices must be unique, got {sel}")
        object.__setattr__(self, "selected", sel)

    def __len__(self):
        return len(self.selected)

    @property
    def indices(self):
        return np.asarray(self.selected, dtype=int)

    def selection_matrix(self, n_beams):
        """Binary ``Q x B`` selection matrix ``A``."""
        A = np.zeros((n_beams, len(self)), dtype=int)
        A[self.indices, np.arange(len(self))] = 1
        return A


def dft_codebook(n_v, n_h):
    """Conjugated Kronecker DFT codebook ``(F_V kron F_H)^*``.

    Column ``n`` of the ``N``-point factor is ``v_N(-1 + 2n/N)``, n = 0..N-1.
    """
    if n_v < 1 or n_h < 1:
        raise ValueError("array dimensions must be >= 1")
    grid_1v = -1.0 + 2.0 * np.arange(n_v) / n_v
    grid_1h = -1.0 + 2.0 * np.arange(n_h) / n_h
    Fv = steering_1d(n_v, grid_1v).T
    Fh = steering_1d(n_h, grid_1h).T
    F = np.kron(Fv, Fh).conj()
    gv, gh = np.meshgrid(grid_1v, grid_1h, indexing="ij")
    return BeamCodebook(F=F, grid_v=gv.ravel(), grid_h=gh.ravel(), shape=(n_v, n_h))


def identity_codebook(n_tx):
    """Antenna-domain "codebook": every beam is one antenna element."""
    return BeamCodebook(F=np.eye(n_tx, dtype=complex))


def effective_channel(H, codebook, plan):
    """Beam-domain channel ``H F A`` (N_R x B)."""
    idx = plan.indices
    if idx.size and (idx.min() < 0 or idx.max() >= codebook.size):
        raise IndexError(f"beam index out of range for a codebook of {codebook.size} beams")
    return np.asarray(H) @ codebook.F[:, idx]


def dirichlet_ratio(N, x):
    """``sinc(N x) / sinc(x)`` with ``sinc(x) = sin(pi x)/(pi x)``.

    Equals ``sin(N pi x) / (N sin(pi x))``; the removable singularities at
    integer ``x`` use the limit ``cos(N pi x) / cos(pi x)``.
    """
    x = np.asarray(x, dtype=float)
    den = N * np.sin(np.pi * x)
    small = np.abs(den) < 1e-8
    safe = np.where(small, 1.0, den)
    out = np.where(small, np.cos(N * np.pi * x) / np.cos(np.pi * x), np.sin(N * np.pi * x) / safe)
    return out[()] if out.ndim == 0 else out


def beam_gains(gamma, theta_t, phi_t, codebook):
    """Closed-form LoS power ``gamma*|v^T f_q|^2`` for every beam ``q``.

    Broadcasts over leading dimensions of ``gamma``/angles; the beam axis is
    last.  Only the beam-grid coordinates are touched, never ``F`` itself.
    """
    n_v, n_h = codebook.shape
    cv = np.cos(np.asarray(theta_t, dtype=float))[..., None]
    ch = (np.sin(np.asarray(theta_t, dtype=float)) * np.cos(np.asarray(phi_t, dtype=float)))[..., None]
    rv = dirichlet_ratio(n_v, (cv - codebook.grid_v) / 2.0)
    rh = dirichlet_ratio(n_h, (ch - codebook.grid_h) / 2.0)
    return np.asarray(gamma, dtype=float)[..., None] * (rv * rh) ** 2


def beam_gain(gamma, theta_t, phi_t, grid_point, n_v, n_h):
    """Closed-form beam gain of a single beam centred on ``grid_point``."""
    w_v, w_h = grid_point
    cv = np.cos(theta_t)
    ch = np.sin(theta_t) * np.cos(phi_t)
    rv = dirichlet_ratio(n_v, (cv - w_v) / 2.0)
    rh = dirichlet_ratio(n_h, (ch - w_h) / 2.0)
    return float(gamma * (rv * rh) ** 2)
