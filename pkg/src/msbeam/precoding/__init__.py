"""Beam-domain multi-satellite precoders."""
from __future__ import annotations

from sklearn.base import BaseEstimator

from ..validation import check_problem
from .cdwmmse import auxiliaries, cdwmmse, ubound_sum_rate_of
from .closed_form import cdm_precoder, cdm_stacked, dft_precoder, lib_precoder
from .covariance import (CovPair, assemble_cov, compute_delta, delta_tensor, mse_matrix,
                         p3_objective, q_vectors, sqrt_sig, tilde_sigma, tilde_sigma_all,
                         ubound_rates, update_C, update_D)
from .gradients import GradientPack, beta_tilde, gradient_pack, lagrangian_residual, solve_W
from .problem import BeamspaceProblem, PrecoderSet, build_problem, rescale_satellite_power

__all__ = [
    "BeamspaceProblem", "PrecoderSet", "build_problem", "rescale_satellite_power",
    "CovPair", "compute_delta", "delta_tensor", "tilde_sigma", "tilde_sigma_all", "q_vectors",
    "assemble_cov", "sqrt_sig", "update_D", "update_C", "mse_matrix", "p3_objective",
    "ubound_rates", "GradientPack", "gradient_pack", "beta_tilde", "solve_W",
    "lagrangian_residual", "cdwmmse", "auxiliaries", "ubound_sum_rate_of", "cdm_precoder",
    "cdm_stacked", "lib_precoder", "dft_precoder", "BeamspacePrecoder", "PRECODERS",
]

PRECODERS = ("dft", "lib", "cdm", "cdwm")


class BeamspacePrecoder(BaseEstimator):
    """Estimator front end for the precoder families.

    ``fit(problem)`` stores the :class:`PrecoderSet` in ``precoders_``;
    ``score(problem)`` returns the weighted upper-bound sum rate.

    Parameters
    ----------
    method : {"cdwm", "cdm", "lib", "dft"}
    max_iter, tol, chi, init
        Passed to :func:`cdwmmse`; ignored by the closed forms.
    random_state : int, optional
        Seed for ``init="random"``.
    """

    def __init__(self, method="cdwm", max_iter=50, tol=1e-3, chi=1.0, init="cdm", random_state=None):
        self.method = method
        self.max_iter = max_iter
        self.tol = tol
        self.chi = chi
        self.init = init
        self.random_state = random_state

    def fit(self, problem, y=None):
        check_problem(problem)
        if self.method == "cdwm":
            pre = cdwmmse(problem, max_iter=self.max_iter, tol=self.tol, chi=self.chi,
                          init=self.init, rng=self.random_state)
        elif self.method == "cdm":
            pre = cdm_precoder(problem)
        elif self.method == "lib":
            pre = lib_precoder(problem)
        elif self.method == "dft":
            pre = dft_precoder(problem)
        else:
            raise ValueError(f"unknown precoder {self.method!r}; choose from {PRECODERS}")
        pre.check_power()
        self.precoders_ = pre
        self.n_iter_ = pre.n_iter
        return self

    def predict(self, problem):
        return self.fit(problem).precoders_.W

    def score(self, problem, y=None):
        return ubound_sum_rate_of(problem, self.precoders_.W)
