"""Two-stage low-complexity beam selection and the full-activation baseline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .beamspace import BeamPlan, beam_gains, effective_channel

__all__ = ["lcms_select", "lcms_select_satellite", "full_select", "LCMSBeamSelector"]


def lcms_select_satellite(gamma, theta_t, phi_t, codebook, n_beams):
    """Select ``n_beams`` beams of one satellite for the UTs it serves.

    ``gamma``, ``theta_t`` and ``phi_t`` hold one entry per served UT.  Stage 1
    gives each UT, strongest first, its best still-unselected beam; stage 2
    fills the remaining slots with the beams of largest total power over all
    served UTs.  Ties go to the lower beam index.
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    n_ut = gamma.size
    Q = codebook.size
    if n_beams > Q:
        raise ValueError(f"cannot activate {n_beams} beams from a codebook of {Q}")
    if n_beams < n_ut:
        raise ValueError(f"B_s = {n_beams} beams cannot seed all {n_ut} served UTs")
    if n_ut == 0:
        return BeamPlan(tuple(range(n_beams)))
    gains = beam_gains(gamma, np.atleast_1d(theta_t), np.atleast_1d(phi_t), codebook)
    free = np.ones(Q, dtype=bool)
    selected = []
    for k in np.lexsort((np.arange(n_ut), -gamma)):
        g = np.where(free, gains[k], -np.inf)
        q = int(np.argmax(g))
        selected.append(q)
        free[q] = False
    score = gains.sum(axis=0)
    rest = np.flatnonzero(free)
    rest = rest[np.argsort(-score[rest], kind="stable")]
    selected.extend(int(q) for q in rest[: n_beams - n_ut])
    return BeamPlan(tuple(selected))


def lcms_select(table, association, codebooks, n_beams):
    """Beam plans for every satellite.

    ``codebooks`` and ``n_beams`` are either one value shared by all
    satellites or one per satellite.
    """
    S = table.n_sat
    if not isinstance(codebooks, (list, tuple)):
        codebooks = [codebooks] * S
    n_beams = np.broadcast_to(np.asarray(n_beams, dtype=int), (S,))
    plans = []
    for s in range(S):
        ks = association.served_uts(s)
        plans.append(lcms_select_satellite(
            table.gamma[s, ks], table.angles[s, ks, 0], table.angles[s, ks, 1],
            codebooks[s], int(n_beams[s])))
    return plans


def full_select(codebook):
    """Activate every beam of the codebook."""
    return BeamPlan(tuple(range(codebook.size)))


class LCMSBeamSelector(BaseEstimator):
    """Estimator form of the two-stage selector.

    ``fit(table, association)`` stores the per-satellite ``plans_``.  With
    ``mode="full"`` every beam is activated instead.
    """

    def __init__(self, codebook=None, n_beams=48, mode="lcms"):
        self.codebook = codebook
        self.n_beams = n_beams
        self.mode = mode

    def fit(self, table, association):
        if self.codebook is None:
            raise ValueError("a codebook is required")
        if self.mode == "lcms":
            self.plans_ = lcms_select(table, association, self.codebook, self.n_beams)
        elif self.mode == "full":
            self.plans_ = [full_select(self.codebook) for _ in range(table.n_sat)]
        else:
            raise ValueError(f"unknown selection mode {self.mode!r}")
        return self

    def transform(self, H, s=0):
        """Beam-domain channel of satellite ``s`` for an antenna-domain ``H``."""
        return effective_channel(H, self.codebook, self.plans_[s])
