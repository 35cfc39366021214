import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msbeam.beamspace import (BeamPlan, beam_gain, beam_gains, dft_codebook, dirichlet_ratio,
                              effective_channel, identity_codebook)
from msbeam.channel import steering_1d, upa_steering


class TestCodebook:
    def test_unitary_16x16(self):
        F = dft_codebook(16, 16).F
        assert F.shape == (256, 256)
        assert np.abs(F.conj().T @ F - np.eye(256)).max() < 1e-12

    def test_scalar(self):
        assert dft_codebook(1, 1).F == pytest.approx(np.ones((1, 1)))

    def test_two_by_one(self):
        F = dft_codebook(2, 1).F
        # grid points -1 and 0
        np.testing.assert_allclose(F[:, 0], np.conj(np.array([1, -1]) / np.sqrt(2)), atol=1e-15)
        np.testing.assert_allclose(F[:, 1], np.array([1, 1]) / np.sqrt(2), atol=1e-15)

    def test_columns_are_steering_vectors(self):
        cb = dft_codebook(4, 2)
        for q in range(cb.size):
            ref = np.kron(steering_1d(4, cb.grid_v[q]), steering_1d(2, cb.grid_h[q])).conj()
            np.testing.assert_allclose(cb.F[:, q], ref, atol=1e-14)

    def test_identity(self):
        assert np.array_equal(identity_codebook(3).F, np.eye(3))

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            dft_codebook(0, 4)


class TestPlan:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            BeamPlan((1, 2, 1))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 63), min_size=1, max_size=64, unique=True))
    def test_selection_matrix(self, idx):
        plan = BeamPlan(tuple(idx))
        A = plan.selection_matrix(64)
        assert A.shape == (64, len(idx))
        assert np.all(A.sum(axis=0) == 1) and np.all(A.sum(axis=1) <= 1)


class TestEffectiveChannel:
    def test_full_plan_preserves_norm_and_spectrum(self, rng):
        cb = dft_codebook(4, 4)
        H = rng.standard_normal((3, 16)) + 1j * rng.standard_normal((3, 16))
        Hb = effective_channel(H, cb, BeamPlan(tuple(range(16))))
        assert np.linalg.norm(Hb) == pytest.approx(np.linalg.norm(H), rel=1e-12)
        np.testing.assert_allclose(np.linalg.svd(Hb, compute_uv=False),
                                   np.linalg.svd(H, compute_uv=False), rtol=1e-12)

    def test_single_beam(self, rng):
        cb = dft_codebook(4, 4)
        H = rng.standard_normal((2, 16)) + 1j * rng.standard_normal((2, 16))
        np.testing.assert_allclose(effective_channel(H, cb, BeamPlan((5,)))[:, 0], H @ cb.F[:, 5])

    def test_columns(self, rng):
        cb = dft_codebook(4, 4)
        H = rng.standard_normal((2, 16)) + 1j * rng.standard_normal((2, 16))
        plan = BeamPlan((7, 0, 12))
        Hb = effective_channel(H, cb, plan)
        for b, q in enumerate(plan.selected):
            col = np.array([sum(H[r, n] * cb.F[n, q] for n in range(16)) for r in range(2)])
            np.testing.assert_allclose(Hb[:, b], col, atol=1e-12)

    def test_out_of_range(self, rng):
        with pytest.raises(IndexError):
            effective_channel(np.ones((1, 4)), dft_codebook(2, 2), BeamPlan((4,)))


class TestBeamGain:
    def test_dirichlet_limits(self):
        assert dirichlet_ratio(8, 0.0) == pytest.approx(1.0)
        assert abs(dirichlet_ratio(8, 1.0)) == pytest.approx(1.0)
        assert abs(dirichlet_ratio(8, 1 / 8)) < 1e-12

    def test_aligned_gain(self):
        # unit-norm steering and codeword: |v^T f|^2 = 1, so the gain is gamma
        th, ph = 1.1, 0.7
        n_v = n_h = 8
        w = (np.cos(th), np.sin(th) * np.cos(ph))
        f = np.kron(steering_1d(n_v, w[0]), steering_1d(n_h, w[1])).conj()
        v = upa_steering(th, ph, n_v, n_h)
        brute = 3.0 * abs(v @ f) ** 2
        assert beam_gain(3.0, th, ph, w, n_v, n_h) == pytest.approx(brute, rel=1e-12)
        assert brute == pytest.approx(3.0, rel=1e-12)

    def test_first_null(self):
        th, ph = 1.1, 0.7
        w = (np.cos(th) - 2.0 / 8, np.sin(th) * np.cos(ph))
        assert beam_gain(1.0, th, ph, w, 8, 8) < 1e-12

    def test_matches_los_channel(self, rng):
        cb = dft_codebook(8, 8)
        for _ in range(100):
            th, ph = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
            gamma = rng.uniform(0.1, 10.0)
            u = upa_steering(rng.uniform(0, np.pi), rng.uniform(0, np.pi), 2, 2)
            H = np.sqrt(gamma) * np.outer(u, upa_steering(th, ph, 8, 8))
            brute = np.sum(np.abs(H @ cb.F) ** 2, axis=0)
            g = beam_gains(gamma, th, ph, cb)
            big = brute > 1e-6 * gamma
            np.testing.assert_allclose(g[big], brute[big], rtol=1e-10)
            assert np.all(np.abs(g[~big] - brute[~big]) < 1e-12 * gamma + 1e-10 * brute.max())

    def test_broadcasting(self):
        cb = dft_codebook(4, 4)
        g = beam_gains(np.ones((2, 3)), np.full((2, 3), 1.0), np.full((2, 3), 0.5), cb)
        assert g.shape == (2, 3, 16)
        assert g.sum(axis=-1) == pytest.approx(np.ones((2, 3)))


def test_brute_force_pairs_use_all_combinations():
    # sanity check on the combinatorial helper used by the selection oracle
    assert len(list(itertools.combinations(range(64), 2))) == 2016
