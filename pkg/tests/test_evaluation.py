import logging

import numpy as np
import pytest

from msbeam.evaluation import (RateReport, antenna_domain_rates, draw_samples,
                               instantaneous_rates, mc_sum_rate, phase_variance, sample_phases,
                               ubound_sum_rate)
from msbeam.precoding import cdm_precoder, cdwmmse, lib_precoder

from conftest import desk_problem, make_problem, random_W, single_link

LOG = logging.getLogger(__name__)


def antenna_equivalent(table, pb, cb, plans, W, ubar, phase):
    S, K = pb.O.shape
    X = np.stack([[cb.F[:, plans[s].indices] @ W[k, pb.block(s)] for k in range(K)]
                  for s in range(S)])
    H = ubar[..., :, None] * table.v[None, :, :, None, :]
    return antenna_domain_rates(X, H, phase, pb.O, pb.noise_power)


def test_zero_precoders(rng):
    pb = make_problem(rng, S=2, K=3)
    W = np.zeros((3, pb.n_beams, 2), dtype=complex)
    ubar = rng.standard_normal((5, 2, 3, 2)) + 0j
    phase = np.ones((5, 2, 3), dtype=complex)
    assert np.all(instantaneous_rates(pb, W, ubar, phase) == 0)
    assert np.all(ubound_sum_rate(W, pb).rate_ubound == 0)


def test_scalar_snr():
    pb = single_link(B=4, gamma=3.0, noise=0.2)
    w = np.array([0.5, -0.2j, 0.1, 0.3])[:, None]
    ubar = np.sqrt(3.0) * np.ones((1, 1, 1, 1), dtype=complex)
    r = instantaneous_rates(pb, w[None], ubar, np.ones((1, 1, 1), dtype=complex))
    hw = np.sqrt(3.0) * pb.vbar[0] @ w[:, 0]
    assert r[0, 0] == pytest.approx(np.log2(1 + abs(hw) ** 2 / 0.2), rel=1e-14)


def test_degenerate_bound_equals_mc():
    pb = single_link(B=4, gamma=3.0, noise=0.2)
    W = cdwmmse(pb).W

    class Table:
        rho_los = pb.rho
        mean_phase = pb.mean_phase

    ubar = np.sqrt(pb.rho)[None, :, :, None] * pb.u[None]
    samples = (np.repeat(ubar, 10, axis=0), np.ones((10, 1, 1), dtype=complex))
    rep = mc_sum_rate(W, pb, Table, samples=samples)
    assert rep.sum_mc == pytest.approx(rep.sum_ubound, rel=1e-12)
    assert rep.sum_stderr == pytest.approx(0.0, abs=1e-12)


def test_power_noise_scaling(rng):
    pb = make_problem(rng, S=2, K=3)
    W = random_W(rng, pb)
    ubar = rng.standard_normal((8, 2, 3, 2)) + 1j * rng.standard_normal((8, 2, 3, 2))
    phase = sample_phases(pb.mean_phase, rng, 8)
    r1 = instantaneous_rates(pb, W, ubar, phase)
    pb.noise_power = pb.noise_power * 4.0
    r2 = instantaneous_rates(pb, 2.0 * W, ubar, phase)
    np.testing.assert_allclose(r1, r2, rtol=1e-12)


def test_beamspace_equals_antenna_domain():
    cfg, table, assoc, cb, plans, pb = desk_problem(1, selection="full", num_uts=4,
                                                    max_uts_per_sat=4)
    W = cdm_precoder(pb).W
    ubar, phase = draw_samples(table, np.random.default_rng(0), 20)
    beam = instantaneous_rates(pb, W, ubar, phase)
    ant = antenna_equivalent(table, pb, cb, plans, W, ubar, phase)
    assert np.abs(beam - ant).max() < 1e-9


def test_stderr_scales_with_trials():
    _, table, _, _, _, pb = desk_problem(2)
    pre = lib_precoder(pb)
    a = mc_sum_rate(pre, pb, table, trials=400, rng=0)
    b = mc_sum_rate(pre, pb, table, trials=1600, rng=1)
    assert b.sum_stderr / a.sum_stderr == pytest.approx(0.5, rel=0.2)
    assert a.per_trial.shape == (400, pb.n_ut)
    assert np.all(a.stderr > 0)


def test_reproducible_and_cross_terms():
    _, table, _, _, _, pb = desk_problem(3)
    pre = cdm_precoder(pb)
    a = mc_sum_rate(pre, pb, table, trials=64, rng=5)
    b = mc_sum_rate(pre, pb, table, trials=64, rng=5)
    assert a.sum_mc == b.sum_mc
    c = mc_sum_rate(pre, pb, table, trials=64, rng=5, cross_terms=True, chunk=16)
    assert np.isfinite(c.sum_mc) and c.sum_mc > 0


def test_upper_bound_statistics():
    # the bound holds in expectation by Jensen; the count is logged, not asserted
    rng = np.random.default_rng(8)
    hits = 0
    for i in range(20):
        _, table, _, _, _, pb = desk_problem(100 + i, num_uts=4, max_uts_per_sat=4,
                                             beams_per_sat=8)
        rep = mc_sum_rate(cdm_precoder(pb), pb, table, trials=100, rng=rng)
        hits += np.all(rep.rate_ubound >= rep.rate_mc - 3 * rep.stderr)
    LOG.info("upper bound above MC - 3 se in %d of 20 instances", hits)
    assert 0 <= hits <= 20


def test_report_sums():
    rep = RateReport(rate_mc=np.array([1.0, 2.0]), stderr=np.array([0.3, 0.4]),
                     rate_ubound=np.array([1.5, 2.5]), weights=np.array([1.0, 2.0]), trials=1)
    assert rep.sum_mc == 5.0 and rep.sum_ubound == 6.5
    assert rep.sum_stderr == pytest.approx(np.hypot(0.3, 0.8))


class TestPhases:
    def test_variance(self):
        assert phase_variance(np.exp(-0.25)) == pytest.approx(0.5)
        assert phase_variance(1.0) == 0.0
        assert phase_variance(0.0) == np.inf
        with pytest.raises(ValueError):
            phase_variance(1.5)

    def test_mean(self):
        ph = sample_phases(np.array([np.exp(-0.25) * np.exp(0.4j)]), np.random.default_rng(0),
                           400_000)
        assert ph.shape == (400_000, 1)
        assert abs(ph.mean() - np.exp(-0.25 + 0.4j)) < 5e-3

    def test_uniform_for_zero_mean(self):
        ph = sample_phases(np.zeros(2), np.random.default_rng(1), 100_000)
        assert np.abs(ph.mean(axis=0)).max() < 0.02
        np.testing.assert_allclose(np.abs(ph), 1.0)

    def test_draw_samples_validation(self):
        _, table, _, _, _, _ = desk_problem(0)
        with pytest.raises(ValueError):
            draw_samples(table, np.random.default_rng(0), 0)
