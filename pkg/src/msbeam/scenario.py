"""Random multi-satellite geometries, link budgets and statistical CSI.

Orbits are not propagated: each draw picks a random centre on a spherical
Earth, scatters UTs uniformly over a coverage disk around it and puts the
satellites at a fixed altitude above random sub-satellite points, rejecting
placements that leave any UT below the minimum elevation.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
import yaml

from .channel import NLOS_CONVENTIONS, ScsiTable

LOG = logging.getLogger(__name__)

__all__ = [
    "ScenarioConfig",
    "Geometry",
    "generate_scenario",
    "derive_scsi",
    "noise_power",
    "free_space_gain",
    "load_config",
    "dbm_to_watt",
    "link_geometry",
]

EARTH_RADIUS = 6371.0e3
SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
MIN_ELEVATION_DEG = 10.0
SCHEMA_VERSION = 1


def dbm_to_watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


@dataclass
class ScenarioConfig:
    """Simulation parameters; defaults follow the reference deployment.

    ``tx_power_dbm`` is the per-satellite power on the subcarrier of
    interest.  ``rician_k_db`` is the interval ``kappa`` is drawn from,
    uniformly in dB.  ``nlos_convention="literal"`` switches the NLoS power to
    the literal ``gamma*kappa/(kappa+1)`` coefficient.
    """

    num_satellites: int = 5
    num_uts: int = 48
    serving_per_ut: int = 3
    max_uts_per_sat: int = 36
    tx_array: tuple = (16, 16)
    rx_array: tuple = (2, 2)
    streams_per_ut: int = 2
    beams_per_sat: int = 48
    carrier_freq: float = 2.0e9
    subcarrier_spacing: float = 30.0e3
    tx_power_dbm: float = 30.0
    coverage_radius: float = 800.0e3
    altitude: float = 600.0e3
    phase_error_var: float = 0.5
    rician_k_db: tuple = (7.0, 15.0)
    noise_figure_db: float = 7.0
    antenna_temp: float = 290.0
    tx_element_gain_dbi: float = 6.0
    rx_gain_dbi: float = 0.0
    nlos_convention: str = "normalized"
    rng_seed: int = 0

    def __post_init__(self):
        self.tx_array = tuple(int(n) for n in self.tx_array)
        self.rx_array = tuple(int(n) for n in self.rx_array)
        self.rician_k_db = tuple(float(x) for x in self.rician_k_db)
        self.validate()

    @property
    def n_tx(self):
        return self.tx_array[0] * self.tx_array[1]

    @property
    def n_rx(self):
        return self.rx_array[0] * self.rx_array[1]

    @property
    def tx_power(self):
        return float(dbm_to_watt(self.tx_power_dbm))

    def validate(self):
        counts = {
            "num_satellites": self.num_satellites,
            "num_uts": self.num_uts,
            "serving_per_ut": self.serving_per_ut,
            "max_uts_per_sat": self.max_uts_per_sat,
            "streams_per_ut": self.streams_per_ut,
            "beams_per_sat": self.beams_per_sat,
        }
        for name, value in counts.items():
            if int(value) < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if min(self.tx_array + self.rx_array) < 1:
            raise ValueError("array dimensions must be >= 1")
        if self.serving_per_ut > self.num_satellites:
            raise ValueError(
                f"serving_per_ut ({self.serving_per_ut}) exceeds num_satellites ({self.num_satellites})")
        max_streams = min(self.serving_per_ut, self.n_rx)
        if self.streams_per_ut > max_streams:
            raise ValueError(
                f"streams_per_ut ({self.streams_per_ut}) exceeds min(serving_per_ut, N_R) = {max_streams}")
        if self.beams_per_sat > self.n_tx:
            raise ValueError(f"beams_per_sat ({self.beams_per_sat}) exceeds N_T ({self.n_tx})")
        for name in ("carrier_freq", "subcarrier_spacing", "coverage_radius", "altitude", "antenna_temp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.phase_error_var < 0:
            raise ValueError("phase_error_var must be >= 0")
        if self.nlos_convention not in NLOS_CONVENTIONS:
            raise ValueError(f"nlos_convention must be one of {NLOS_CONVENTIONS}")
        lo, hi = self.rician_k_db
        if lo > hi:
            raise ValueError("rician_k_db must be an interval (low, high)")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class Geometry:
    """Earth-centred positions and per-link angles.

    ``angles[s, k]`` is ``[theta_t, phi_t, theta_r, phi_r]``; theta is
    measured from the array's vertical axis and phi from its horizontal axis
    towards the array normal, so the array boresight is theta = phi = pi/2.
    """

    sat_positions: np.ndarray
    ut_positions: np.ndarray
    center: np.ndarray
    angles: np.ndarray
    slant_ranges: np.ndarray
    elevations: np.ndarray = field(default=None)


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _enu_frame(point):
    """East/north/up unit vectors at an Earth-centred point."""
    up = _unit(point)
    z = np.array([0.0, 0.0, 1.0])
    east = np.cross(z, up)
    n = np.linalg.norm(east, axis=-1, keepdims=True)
    # at the poles pick an arbitrary east
    east = np.where(n > 1e-12, east / np.where(n > 1e-12, n, 1.0), np.array([1.0, 0.0, 0.0]))
    north = np.cross(up, east)
    return east, north, up


def _destination(center, bearing, distance):
    """Points at great-circle ``distance`` from ``center`` along ``bearing``."""
    east, north, up = _enu_frame(center)
    ang = np.asarray(distance) / EARTH_RADIUS
    direction = np.cos(bearing)[..., None] * north + np.sin(bearing)[..., None] * east
    return EARTH_RADIUS * (np.cos(ang)[..., None] * up + np.sin(ang)[..., None] * direction)


def _array_angles(direction, axis_v, axis_h, normal):
    """(theta, phi) of unit ``direction`` w.r.t. an array frame."""
    cv = np.clip(np.sum(direction * axis_v, axis=-1), -1.0, 1.0)
    ch = np.sum(direction * axis_h, axis=-1)
    cn = np.sum(direction * normal, axis=-1)
    return np.arccos(cv), np.arctan2(cn, ch)


def link_geometry(sat_pos, ut_pos):
    """Angles (S, K, 4), slant ranges (S, K) and UT elevations in degrees (S, K)."""
    S, K = len(sat_pos), len(ut_pos)
    diff = ut_pos[None, :, :] - sat_pos[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    d = diff / dist[..., None]
    s_e, s_n, s_u = _enu_frame(sat_pos)
    u_e, u_n, u_u = _enu_frame(ut_pos)
    # satellite array faces nadir; UT array faces zenith
    th_t, ph_t = _array_angles(d, s_n[:, None], s_e[:, None], -s_u[:, None])
    th_r, ph_r = _array_angles(-d, u_n[None], u_e[None], u_u[None])
    elev = np.degrees(np.arcsin(np.clip(np.sum(-d * u_u[None], axis=-1), -1.0, 1.0)))
    angles = np.stack([th_t, ph_t, th_r, ph_r], axis=-1).reshape(S, K, 4)
    return angles, dist, elev


def generate_scenario(config, rng=None):
    """Draw a :class:`Geometry`; deterministic in ``config.rng_seed`` when ``rng`` is None."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    lat = np.arcsin(rng.uniform(-1.0, 1.0))
    lon = rng.uniform(-np.pi, np.pi)
    center = EARTH_RADIUS * np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])

    K, S = config.num_uts, config.num_satellites
    r = config.coverage_radius * np.sqrt(rng.uniform(0.0, 1.0, K))
    ut_pos = _destination(center, rng.uniform(0.0, 2 * np.pi, K), r)

    sat_pos = np.empty((S, 3))
    for s in range(S):
        for _ in range(10_000):
            rr = config.coverage_radius * np.sqrt(rng.uniform())
            sub = _destination(center, np.array(rng.uniform(0.0, 2 * np.pi)), np.array(rr))
            cand = sub * (EARTH_RADIUS + config.altitude) / EARTH_RADIUS
            _, _, elev = link_geometry(cand[None], ut_pos)
            if elev.min() >= MIN_ELEVATION_DEG:
                sat_pos[s] = cand
                break
        else:
            raise RuntimeError("could not place a satellite above the minimum elevation for all UTs")
    angles, dist, elev = link_geometry(sat_pos, ut_pos)
    return Geometry(sat_positions=sat_pos, ut_positions=ut_pos, center=center,
                    angles=angles, slant_ranges=dist, elevations=elev)


def free_space_gain(distance, carrier_freq):
    """Friis free-space power gain ``(c / (4 pi f d))^2``."""
    return (SPEED_OF_LIGHT / (4.0 * np.pi * carrier_freq * np.asarray(distance, dtype=float))) ** 2


def noise_power(config):
    """Thermal noise power over one subcarrier including the noise figure (W)."""
    return BOLTZMANN * config.antenna_temp * config.subcarrier_spacing * 10.0 ** (config.noise_figure_db / 10.0)


def derive_scsi(geom, config, rng=None):
    """Statistical CSI table for a geometry.

    Channel power includes the full transmit and receive array gains, since
    the steering vectors are unit norm.  The NLoS covariance is isotropic
    with unit trace.
    """
    if rng is None:
        rng = np.random.default_rng([config.rng_seed, 1])
    S, K = geom.slant_ranges.shape
    g_tx = 10.0 ** (config.tx_element_gain_dbi / 10.0) * config.n_tx
    g_rx = 10.0 ** (config.rx_gain_dbi / 10.0) * config.n_rx
    gamma = g_tx * g_rx * free_space_gain(geom.slant_ranges, config.carrier_freq)
    lo, hi = config.rician_k_db
    kappa = 10.0 ** (rng.uniform(lo, hi, size=(S, K)) / 10.0)
    n_r = config.n_rx
    cov = np.broadcast_to(np.eye(n_r, dtype=complex) / n_r, (S, K, n_r, n_r)).copy()
    mean_phase = np.full((S, K), np.exp(-config.phase_error_var / 2.0), dtype=complex)
    return ScsiTable(gamma=gamma, kappa=kappa, angles=geom.angles, nlos_cov=cov,
                     mean_phase=mean_phase, tx_shape=config.tx_array, rx_shape=config.rx_array,
                     noise_power=np.full(K, noise_power(config)),
                     nlos_convention=config.nlos_convention)


def load_config(path):
    """Read a YAML config file; returns ``(ScenarioConfig, raw_dict)``.

    The scenario parameters live under the ``scenario`` section; any other
    top-level section is returned untouched for the caller.
    """
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
    section = raw.get("scenario", {}) or {}
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    return ScenarioConfig(**section), raw
