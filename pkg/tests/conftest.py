import numpy as np
import pytest

from msbeam.beam_select import full_select, lcms_select
from msbeam.beamspace import dft_codebook
from msbeam.clustering import cluster
from msbeam.precoding import BeamspaceProblem, build_problem
from msbeam.scenario import ScenarioConfig, derive_scsi, generate_scenario

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_unit(rng, shape):
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    C = A @ A.conj().T
    return C / np.trace(C).real


def random_association(rng, S, K):
    O = (rng.uniform(size=(S, K)) < 0.6).astype(int)
    for k in range(K):
        if not O[:, k].any():
            O[rng.integers(S), k] = 1
    return O


def make_problem(rng, S=2, K=2, N=2, M=2, B=3, O=None, los_only=False, phase=True):
    """Random beam-domain problem with moderate SNR, no geometry involved."""
    if O is None:
        O = random_association(rng, S, K)
    B = np.broadcast_to(np.asarray(B), (S,))
    offsets = np.concatenate([[0], np.cumsum(B)])
    cov = np.stack([[random_psd(rng, N) for _ in range(K)] for _ in range(S)])
    mp = rng.uniform(0.3, 1.0, (S, K)) * np.exp(1j * rng.uniform(-np.pi, np.pi, (S, K)))
    return BeamspaceProblem(
        vbar=(rng.standard_normal((K, offsets[-1])) + 1j * rng.standard_normal((K, offsets[-1])))
        / np.sqrt(2 * B.max()),
        offsets=offsets, O=O, u=random_unit(rng, (S, K, N)),
        rho=rng.uniform(0.5, 2.0, (S, K)),
        rho_nlos=np.zeros((S, K)) if los_only else rng.uniform(0.05, 0.5, (S, K)),
        nlos_cov=cov, mean_phase=mp if phase else np.ones((S, K), dtype=complex),
        noise_power=rng.uniform(0.05, 0.5, K), tx_power=rng.uniform(1.0, 3.0, S),
        streams=M, weights=np.ones(K))


def random_W(rng, problem, M=None):
    M = problem.streams if M is None else M
    W = rng.standard_normal((problem.n_ut, problem.n_beams, M)) \
        + 1j * rng.standard_normal((problem.n_ut, problem.n_beams, M))
    for s in range(problem.n_sat):
        W[:, problem.block(s)] *= problem.O[s][:, None, None]
    return W


def single_link(B=6, gamma=2.0, noise=0.1, P=1.0, seed=0):
    """One UT, one satellite, one receive antenna, pure LoS, no phase error."""
    rng = np.random.default_rng(seed)
    vbar = rng.standard_normal((1, B)) + 1j * rng.standard_normal((1, B))
    vbar /= np.linalg.norm(vbar)
    return BeamspaceProblem(
        vbar=vbar, offsets=[0, B], O=np.ones((1, 1), dtype=int), u=np.ones((1, 1, 1), dtype=complex),
        rho=np.array([[gamma]]), rho_nlos=np.zeros((1, 1)), nlos_cov=np.zeros((1, 1, 1, 1)),
        mean_phase=np.ones((1, 1), dtype=complex), noise_power=noise, tx_power=P, streams=1)


def desk_problem(seed, selection="lcms", **overrides):
    """Geometry-based pipeline up to the precoding problem."""
    params = dict(num_satellites=3, num_uts=8, serving_per_ut=3, max_uts_per_sat=8,
                  tx_array=(8, 8), rx_array=(2, 2), streams_per_ut=2, beams_per_sat=16)
    params.update(overrides)
    cfg = ScenarioConfig(rng_seed=seed, **params)
    table = derive_scsi(generate_scenario(cfg), cfg)
    assoc = cluster(table.gamma, cfg.serving_per_ut, cfg.max_uts_per_sat)
    cb = dft_codebook(*cfg.tx_array)
    if selection == "lcms":
        plans = lcms_select(table, assoc, cb, cfg.beams_per_sat)
    else:
        plans = [full_select(cb)] * cfg.num_satellites
    problem = build_problem(table, assoc, plans, cb, cfg.tx_power, cfg.streams_per_ut)
    return cfg, table, assoc, cb, plans, problem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
