import numpy as np
import pytest
from sklearn.base import clone

from msbeam.evaluation import draw_samples, mc_sum_rate
from msbeam.precoding import (BeamspacePrecoder, PrecoderSet, cdm_precoder,
                              cdm_stacked, cdwmmse, dft_precoder, lib_precoder,
                              rescale_satellite_power, ubound_sum_rate_of)

from conftest import desk_problem, make_problem, single_link


def cosine(a, b):
    return abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))


class TestCdwmmse:
    def test_matched_filter(self):
        pb = single_link()
        out = cdwmmse(pb)
        w = out.W[0, :, 0]
        assert cosine(w, pb.vbar[0].conj()) > 1 - 1e-10
        assert np.sum(np.abs(w) ** 2) == pytest.approx(1.0, rel=1e-12)
        ref = np.log2(1 + 1.0 * 2.0 * np.linalg.norm(pb.vbar) ** 2 / 0.1)
        assert ubound_sum_rate_of(pb, out.W) == pytest.approx(ref, rel=1e-10)

    def test_trace_and_best_so_far(self):
        pb = make_problem(np.random.default_rng(4), S=3, K=4, N=2, M=2, B=8)
        out = cdwmmse(pb, max_iter=20)
        assert len(out.trace) == out.n_iter + 1
        assert out.trace[0] == pytest.approx(ubound_sum_rate_of(pb, cdm_precoder(pb).W))
        assert ubound_sum_rate_of(pb, out.W) == pytest.approx(max(out.trace))
        assert ubound_sum_rate_of(pb, out.W) >= out.trace[1]

    def test_power_on_random_instances(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            pb = make_problem(rng, S=int(rng.integers(1, 4)), K=int(rng.integers(1, 4)), B=3)
            out = cdwmmse(pb, max_iter=5)
            out.check_power()
            assert np.all(out.satellite_power() <= pb.tx_power * (1 + 1e-9))

    def test_random_init_and_auxiliaries(self, rng):
        pb = make_problem(rng, S=2, K=3)
        out = cdwmmse(pb, max_iter=3, init="random", rng=1, keep_auxiliaries=True)
        assert len(out.C) == 3 and len(out.D) == 3
        again = cdwmmse(pb, max_iter=3, init="random", rng=1)
        np.testing.assert_array_equal(out.W, again.W)
        explicit = cdwmmse(pb, max_iter=3, init=cdm_stacked(pb))
        np.testing.assert_allclose(explicit.W, cdwmmse(pb, max_iter=3).W)
        with pytest.raises(ValueError):
            cdwmmse(pb, init="bogus")

    def test_stopping_rule(self, rng):
        pb = make_problem(rng, S=2, K=2)
        out = cdwmmse(pb, max_iter=200, tol=1e-3)
        assert out.converged and out.n_iter < 200
        capped = cdwmmse(pb, max_iter=1, tol=-np.inf)
        assert capped.n_iter == 1 and not capped.converged

    def test_non_finite_raises(self, rng):
        pb = make_problem(rng, S=2, K=2)
        W = cdm_stacked(pb)
        W[0, pb.serving_beams(0)[0], 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            cdwmmse(pb, init=W)


class TestCdm:
    def test_truncation(self, rng):
        pb = make_problem(rng, S=3, K=3, N=2, M=2, B=4)
        full = cdm_stacked(pb, streams=2)
        one = cdm_stacked(pb, streams=1)
        for k in range(3):
            lead = full[k, :, :1]
            lead = lead * np.sqrt(pb.per_ut_power[k] / np.sum(np.abs(lead) ** 2))
            np.testing.assert_allclose(one[k], lead, atol=1e-12)

    def test_matched_filter(self):
        pb = single_link(B=8, seed=3)
        w = cdm_precoder(pb).W[0, :, 0]
        assert cosine(w, pb.vbar[0].conj()) > 1 - 1e-8

    def test_beats_dft_for_two_uts(self):
        wins = 0
        for seed in range(50):
            _, table, _, _, _, pb = desk_problem(seed, num_uts=2)
            samples = draw_samples(table, np.random.default_rng([seed, 2]), 100)
            r_cdm = mc_sum_rate(cdm_precoder(pb), pb, table, samples=samples).sum_mc
            r_dft = mc_sum_rate(dft_precoder(pb), pb, table, samples=samples).sum_mc
            wins += r_cdm >= r_dft
        assert wins > 25

    def test_power(self, rng):
        pb = make_problem(rng, S=3, K=4)
        cdm_precoder(pb).check_power()


class TestBaselines:
    def test_one_stream_per_satellite(self, rng):
        pb = make_problem(rng, S=2, K=1, N=2, M=2, O=np.ones((2, 1), dtype=int))
        W = lib_precoder(pb).W[0]
        for s in range(2):
            blk = W[pb.block(s)]
            assert np.count_nonzero(np.any(blk != 0, axis=0)) == 1
            assert np.any(blk[:, s] != 0)

    def test_stream_cycling(self, rng):
        pb = make_problem(rng, S=4, K=1, N=2, M=2, B=3, O=np.ones((4, 1), dtype=int))
        for make in (lib_precoder, dft_precoder):
            W = make(pb).W[0]
            for s in range(4):
                blk = W[pb.block(s)]
                assert np.any(blk[:, s % 2] != 0) and np.all(blk[:, 1 - s % 2] == 0)

    def test_full_beams_unit_norm(self):
        _, _, _, _, _, pb = desk_problem(0, selection="full")
        for s in range(pb.n_sat):
            np.testing.assert_allclose(np.linalg.norm(pb.vbar[:, pb.block(s)], axis=1), 1.0,
                                       rtol=1e-12)

    def test_single_ut_dft_uses_aligned_beam(self):
        pb = single_link(B=8, seed=1)
        W = dft_precoder(pb).W[0, :, 0]
        q = int(np.argmax(np.abs(pb.vbar[0])))
        assert np.count_nonzero(W) == 1 and abs(W[q]) ** 2 == pytest.approx(1.0)

    def test_lib_received_power_dominates(self):
        for seed in range(5):
            _, table, _, _, _, pb = desk_problem(seed, selection="full")
            ubar, _ = draw_samples(table, np.random.default_rng(seed), 50)
            W_lib, W_dft = lib_precoder(pb).W, dft_precoder(pb).W
            for k in range(pb.n_ut):
                for s in np.flatnonzero(pb.O[:, k]):
                    blk = pb.block(s)
                    H = ubar[:, s, k, :, None] * pb.vbar[k, blk][None, None, :]
                    p_lib = np.mean(np.sum(np.abs(H @ W_lib[k, blk]) ** 2, axis=(1, 2)))
                    p_dft = np.mean(np.sum(np.abs(H @ W_dft[k, blk]) ** 2, axis=(1, 2)))
                    assert p_lib >= p_dft * (1 - 1e-12)

    def test_exact_power(self, rng):
        pb = make_problem(rng, S=3, K=4)
        for make in (lib_precoder, dft_precoder):
            np.testing.assert_allclose(make(pb).satellite_power(), pb.tx_power, rtol=1e-12)


def test_rescale_modes():
    W = np.ones((2, 4, 1), dtype=complex)
    off = np.array([0, 2, 4])
    capped = rescale_satellite_power(W, off, np.array([1.0, 8.0]))
    np.testing.assert_allclose(PrecoderSet(capped, off, np.array([1.0, 8.0])).satellite_power(),
                               [1.0, 4.0])
    exact = rescale_satellite_power(W, off, np.array([1.0, 8.0]), exact=True)
    np.testing.assert_allclose(PrecoderSet(exact, off, np.array([1.0, 8.0])).satellite_power(),
                               [1.0, 8.0])
    with pytest.raises(AssertionError):
        PrecoderSet(W, off, np.array([1.0, 1.0])).check_power()


class TestEstimator:
    def test_api(self, rng):
        pb = make_problem(rng, S=2, K=3)
        est = BeamspacePrecoder(method="cdwm", max_iter=5)
        assert est.get_params()["max_iter"] == 5
        est.fit(pb)
        assert est.n_iter_ <= 5
        assert est.score(pb) == pytest.approx(ubound_sum_rate_of(pb, est.precoders_.W))
        for m in ("cdm", "lib", "dft"):
            W = clone(est).set_params(method=m).predict(pb)
            assert W.shape == (3, pb.n_beams, pb.streams)

    def test_rejects_bad_input(self, rng):
        pb = make_problem(rng)
        with pytest.raises(ValueError):
            BeamspacePrecoder(method="zf").fit(pb)
        pb.tx_power[0] = -1.0
        with pytest.raises(ValueError):
            BeamspacePrecoder(method="cdm").fit(pb)
