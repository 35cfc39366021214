"""User-centric satellite clustering by channel-power competition.

Each UT, strongest first, walks its satellites in descending channel power.
A satellite with spare capacity accepts the UT; a full satellite accepts it
only by evicting its weakest non-forced UT, which then resumes its own
search.  A UT that has failed ``fail_threshold`` competitions is forced onto
every remaining satellite with spare capacity.  Afterwards UTs holding more
than ``S_k`` satellites drop their weakest ones, and any UT still short is
completed through an augmenting move, which always exists when
``sum_k S_k <= S * K_max``.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import check_finite_array

LOG = logging.getLogger(__name__)

__all__ = ["Association", "cluster", "SatelliteClustering"]


@dataclass(frozen=True)
class Association:
    """Binary satellite-UT association matrix ``O`` (S x K)."""

    O: np.ndarray

    @property
    def serving_sets(self):
        return [tuple(np.flatnonzero(self.O[:, k])) for k in range(self.O.shape[1])]

    @property
    def served_counts(self):
        return self.O.sum(axis=1)

    @property
    def serving_counts(self):
        return self.O.sum(axis=0)

    def served_uts(self, s):
        return np.flatnonzero(self.O[s])

    def check(self, serving_per_ut, max_uts_per_sat):
        """Raise ``AssertionError`` unless C1, C2 and C5 hold."""
        S, K = self.O.shape
        need = np.broadcast_to(np.asarray(serving_per_ut), (K,))
        cap = np.broadcast_to(np.asarray(max_uts_per_sat), (S,))
        assert set(np.unique(self.O)) <= {0, 1}, "association entries must be binary"
        assert np.array_equal(self.serving_counts, need), "each UT must have exactly S_k satellites"
        assert np.all(self.served_counts <= cap), "satellite capacity exceeded"


def cluster(gamma, serving_per_ut, max_uts_per_sat, fail_threshold=None):
    """Associate UTs with satellites under C1, C2 and C5.

    Parameters
    ----------
    gamma : array of shape (S, K)
        Average channel power of every satellite-UT pair.
    serving_per_ut : int or array of shape (K,)
        Required number of serving satellites ``S_k``.
    max_uts_per_sat : int or array of shape (S,)
        Capacity ``K_s^max``.
    fail_threshold : int, optional
        Competition failures before a UT is force-associated; defaults to
        ``S - S_k + 1``.

    Returns
    -------
    Association
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2:
        raise ValueError("gamma must be an S x K matrix")
    S, K = gamma.shape
    need = np.broadcast_to(np.asarray(serving_per_ut, dtype=int), (K,)).copy()
    cap = np.broadcast_to(np.asarray(max_uts_per_sat, dtype=int), (S,)).copy()
    if np.any(need < 1) or np.any(need > S):
        raise ValueError(f"serving_per_ut must lie in [1, S={S}]")
    if need.sum() > cap.sum():
        raise ValueError(
            f"infeasible clustering: sum_k S_k = {need.sum()} exceeds sum_s K_s^max = {cap.sum()}")
    if fail_threshold is None:
        fail_threshold = S - need + 1
    fail_threshold = np.broadcast_to(np.asarray(fail_threshold, dtype=int), (K,))

    O = np.zeros((S, K), dtype=int)
    forced = np.zeros((S, K), dtype=bool)
    tried = np.zeros((S, K), dtype=bool)
    fails = np.zeros(K, dtype=int)
    # descending power, ties -> lower satellite index
    pref = [np.lexsort((np.arange(S), -gamma[:, k])) for k in range(K)]
    order = np.lexsort((np.arange(K), -gamma.sum(axis=0)))
    queue = deque(int(k) for k in order)
    evictions = 0
    max_evictions = int(S * K * max(int(fail_threshold.max()), 1))

    def force(k):
        for s in pref[k]:
            if O[:, k].sum() >= S:
                break
            if not O[s, k] and O[s].sum() < cap[s]:
                O[s, k] = 1
                forced[s, k] = True
                tried[s, k] = True

    while queue:
        k = queue.popleft()
        while O[:, k].sum() < need[k]:
            if fails[k] >= fail_threshold[k]:
                force(k)
                break
            cand = [s for s in pref[k] if not tried[s, k] and not O[s, k]]
            if not cand:
                force(k)
                break
            s = cand[0]
            tried[s, k] = True
            if O[s].sum() < cap[s]:
                O[s, k] = 1
                continue
            rivals = [j for j in np.flatnonzero(O[s]) if not forced[s, j]]
            if rivals and evictions < max_evictions:
                # weakest rival; ties -> the later UT index is evicted
                weakest = min(rivals, key=lambda j: (gamma[s, j], -j))
                if gamma[s, k] > gamma[s, weakest]:
                    O[s, weakest] = 0
                    O[s, k] = 1
                    fails[weakest] += 1
                    evictions += 1
                    queue.append(int(weakest))
                    continue
            fails[k] += 1
    if evictions >= max_evictions:
        LOG.info("clustering hit the eviction cap (%d)", max_evictions)

    # redundant satellite removal
    for k in range(K):
        extra = O[:, k].sum() - need[k]
        if extra > 0:
            served = np.flatnonzero(O[:, k])
            weakest_first = served[np.lexsort((-served, gamma[served, k]))]
            O[weakest_first[:extra], k] = 0

    _repair(O, gamma, need, cap)
    assoc = Association(O=O)
    assoc.check(need, cap)
    return assoc


def _repair(O, gamma, need, cap):
    """Fill any remaining deficit while keeping C2."""
    S, K = O.shape
    for k in range(K):
        while O[:, k].sum() < need[k]:
            load = O.sum(axis=1)
            free = [s for s in np.argsort(-gamma[:, k], kind="stable")
                    if not O[s, k] and load[s] < cap[s]]
            if free:
                O[free[0], k] = 1
                continue
            # every satellite not serving k is full: move some UT j from a
            # full satellite s to a satellite s2 with spare room
            best = None
            for s2 in np.flatnonzero(load < cap):
                for s in np.flatnonzero(O[:, k] == 0):
                    for j in np.flatnonzero((O[s] == 1) & (O[s2] == 0)):
                        loss = gamma[s, j] - gamma[s2, j] - gamma[s, k]
                        if best is None or loss < best[0]:
                            best = (loss, s, s2, j)
            if best is None:
                raise RuntimeError("clustering repair failed; constraints are infeasible")
            _, s, s2, j = best
            O[s, j], O[s2, j], O[s, k] = 0, 1, 1


class SatelliteClustering(BaseEstimator):
    """Estimator wrapper around :func:`cluster`.

    ``fit`` takes the S x K channel-power matrix and stores the result in
    ``association_`` (and the raw matrix in ``O_``).
    """

    def __init__(self, serving_per_ut=3, max_uts_per_sat=36, fail_threshold=None):
        self.serving_per_ut = serving_per_ut
        self.max_uts_per_sat = max_uts_per_sat
        self.fail_threshold = fail_threshold

    def fit(self, gamma, y=None):
        gamma = check_finite_array(gamma, "gamma", ndim=2)
        self.association_ = cluster(gamma, self.serving_per_ut, self.max_uts_per_sat,
                                    self.fail_threshold)
        self.O_ = self.association_.O
        return self

    def predict(self, gamma):
        return self.fit(gamma).O_
