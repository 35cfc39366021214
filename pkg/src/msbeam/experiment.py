"""Parameter sweeps: scenario -> clustering -> beams -> precoders -> rates."""
from __future__ import annotations

import csv
import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beam_select import full_select, lcms_select
from .beamspace import dft_codebook
from .clustering import cluster
from .evaluation import draw_samples, mc_sum_rate
from .precoding import PRECODERS, BeamspacePrecoder, build_problem
from .scenario import ScenarioConfig, derive_scsi, generate_scenario, load_config

LOG = logging.getLogger(__name__)

__all__ = ["Experiment", "AXES", "CSV_HEADER", "run_cell", "run_experiment", "emit_csv",
           "experiment_from_config"]

AXES = {
    "tx_power": "tx_power_dbm",
    "streams": "streams_per_ut",
    "uts": "num_uts",
    "rx_antennas": "rx_array",
    "serving_sats": "serving_per_ut",
    "beams": "beams_per_sat",
}
CSV_HEADER = ["axis", "value", "precoder", "selection", "seed", "ut_id", "rate_mc", "rate_stderr",
              "rate_ubound", "iters", "wall_ms"]


def _rx_shape(n):
    """Most square factorization ``(rows, cols)`` of ``n`` receive antennas."""
    n = int(n)
    b = max(d for d in range(1, int(np.sqrt(n)) + 1) if n % d == 0)
    return (n // b, b)


@dataclass
class Experiment:
    """One sweep over a single scenario parameter.

    ``values`` must be strictly increasing; every (value, seed) cell runs all
    ``precoders`` on the same scenario draw and the same channel samples.
    """

    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    axis: str = "tx_power"
    values: tuple = (20.0, 30.0, 40.0, 50.0)
    precoders: tuple = PRECODERS
    selection: str = "lcms"
    seeds: tuple = tuple(range(50))
    trials: int = 500
    max_iter: int = 50
    tol: float = 1e-3
    cross_terms: bool = False
    timing: bool = False
    threads: int = 1
    out: str = None

    def __post_init__(self):
        self.values = tuple(self.values)
        self.precoders = tuple(self.precoders)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; choose from {sorted(AXES)}")
        if not self.values:
            raise ValueError("axis values must be nonempty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("axis values must be strictly increasing")
        if not self.precoders:
            raise ValueError("precoder list must be nonempty")
        bad = set(self.precoders) - set(PRECODERS)
        if bad:
            raise ValueError(f"unknown precoders {sorted(bad)}; choose from {PRECODERS}")
        if self.selection not in ("lcms", "full"):
            raise ValueError("selection must be 'lcms' or 'full'")
        if not self.seeds:
            raise ValueError("seed list must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def config_for(self, value, seed):
        name = AXES[self.axis]
        if self.axis == "rx_antennas":
            value = _rx_shape(value)
        elif self.axis != "tx_power":
            value = int(value)
        return self.base.replace(**{name: value, "rng_seed": int(seed)})


def run_cell(exp, value, seed):
    """All precoders for one (axis value, seed) cell; returns result rows."""
    cfg = exp.config_for(value, seed)
    geom = generate_scenario(cfg)
    table = derive_scsi(geom, cfg)
    assoc = cluster(table.gamma, cfg.serving_per_ut, cfg.max_uts_per_sat)
    cb = dft_codebook(*cfg.tx_array)
    if exp.selection == "lcms":
        plans = lcms_select(table, assoc, cb, cfg.beams_per_sat)
    else:
        plans = [full_select(cb)] * cfg.num_satellites
    problem = build_problem(table, assoc, plans, cb, cfg.tx_power, cfg.streams_per_ut)
    # channel draws depend only on the seed, so cells are paired across precoders
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    samples = draw_samples(table, rng, exp.trials)
    rows = []
    for name in exp.precoders:
        t0 = time.perf_counter()
        est = BeamspacePrecoder(name, max_iter=exp.max_iter, tol=exp.tol).fit(problem)
        wall = (time.perf_counter() - t0) * 1e3
        pre = est.precoders_
        pre.check_power()
        rep = mc_sum_rate(pre, problem, table, rng=np.random.default_rng([int(seed), 3]),
                          cross_terms=exp.cross_terms, samples=samples)
        wall_s = _fmt(wall) if exp.timing else ""
        for k in range(problem.n_ut):
            rows.append([exp.axis, value, name, exp.selection, seed, k, rep.rate_mc[k],
                         rep.stderr[k], rep.rate_ubound[k], pre.n_iter, wall_s])
        rows.append([exp.axis, value, name, exp.selection, seed, "sum", rep.sum_mc,
                     rep.sum_stderr, rep.sum_ubound, pre.n_iter, wall_s])
    return rows


def run_experiment(exp):
    """Run every cell, in a thread pool when ``exp.threads > 1``.

    A failing cell is logged and skipped.  Rows come back in a fixed order
    (axis value, precoder, seed, UT) whatever the completion order.
    """
    cells = [(v, s) for v in exp.values for s in exp.seeds]

    def task(cell):
        try:
            return run_cell(exp, *cell)
        except Exception:  # noqa: BLE001 - a bad cell must not kill the sweep
            LOG.exception("cell %s=%s seed=%s failed", exp.axis, *cell)
            return []

    if exp.threads > 1:
        with ThreadPoolExecutor(max_workers=exp.threads) as pool:
            results = list(pool.map(task, cells))
    else:
        results = [task(c) for c in cells]
    rows = [r for res in results for r in res]
    vidx = {v: i for i, v in enumerate(exp.values)}
    pidx = {p: i for i, p in enumerate(exp.precoders)}

    def key(r):
        ut = r[5]
        return (vidx[r[1]], pidx[r[2]], r[4], 1 if ut == "sum" else 0, ut if ut != "sum" else 0)

    return sorted(rows, key=key)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def emit_csv(rows, path):
    """Write result rows with the fixed header; numbers keep 12 significant digits."""
    if not rows:
        raise ValueError("result table is empty")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def experiment_from_config(path, **overrides):
    """Build an :class:`Experiment` from a YAML file's ``scenario`` and ``experiment`` sections."""
    base, raw = load_config(path)
    section = dict(raw.get("experiment", {}) or {})
    known = {f.name for f in dataclasses.fields(Experiment)} - {"base"}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    section.update({k: v for k, v in overrides.items() if v is not None})
    return Experiment(base=base, **section)
