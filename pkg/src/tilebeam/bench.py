"""Batch experiment runner: sweep one configuration field, run the requested
schemes over Monte Carlo channel draws, and persist one CSV record per
(sweep point, seed, scheme).

Seeds drive channel realizations; scheme-internal randomness derives
per-scheme sub-seeds from (seed, scheme), so every scheme sees identical
channels.  Output is deterministic apart from the wall-clock column.
"""

import csv
import time
from dataclasses import dataclass

import numpy as np

from .channels import synth_channels
from .codebook import build_codebook
from .config import ScenarioConfig
from .conic import ConicSolverError
from .preselect import calibrate_threshold
from .scenario import sample_scenario
from .schemes import (SchemeResult, baseline_mrt, baseline_random_mode,
                      baseline_random_phase, bnb_scheme, enumerate_optimal,
                      linear_eh_scheme, no_irs_scheme, sca_scheme)

CSV_HEADER = ["sweepName", "sweepValue", "seed", "schemeId", "objectiveDbm",
              "iterations", "wallMillis", "feasible", "gapAtTermination",
              "binarityResidual"]

SWEEP_FIELDS = {
    "minSINR": "min_sinr_db",
    "minHarvest": "min_harvest_uw",
    "S": "target_mode_set_size",
    "targetModeSetSize": "target_mode_set_size",
    "numAntennas": "num_antennas",
    "numIRs": "num_irs",
    "numERs": "num_ers",
    "numTiles": "num_tiles",
    "omega": "omega",
    "maxPower": "max_power_dbm",
    "shadowDirect": "shadow_direct_db",
}

_SCHEME_ORDER = ("Oracle", "BnB", "SCA", "B1", "B2", "B3", "LinearEH", "NoIRS")


class UnknownSweepFieldError(ValueError):
    pass


@dataclass
class ExperimentRecord:
    sweep_name: str
    sweep_value: float
    seed: int
    scheme_id: str
    objective_dbm: float | None
    iterations: int
    wall_millis: float
    feasible: bool
    gap: float | None = None          # exact solver only
    binarity_residual: float | None = None  # convex-approximation solver only

    def row(self) -> list:
        return [
            self.sweep_name,
            f"{self.sweep_value:.10g}",
            self.seed,
            self.scheme_id,
            "INF" if self.objective_dbm is None else f"{self.objective_dbm:.9g}",
            self.iterations,
            f"{self.wall_millis:.3f}",
            int(self.feasible),
            "" if self.gap is None else f"{self.gap:.6g}",
            "" if self.binarity_residual is None else f"{self.binarity_residual:.6g}",
        ]


def emit_records(records: list, path) -> None:
    """Fixed, documented column order; UTF-8; INF sentinel for infeasible."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow(rec.row())


def parse_records(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            feasible = bool(int(row["feasible"]))
            out.append(ExperimentRecord(
                row["sweepName"], float(row["sweepValue"]), int(row["seed"]),
                row["schemeId"],
                None if row["objectiveDbm"] == "INF" else float(row["objectiveDbm"]),
                int(row["iterations"]), float(row["wallMillis"]), feasible,
                float(row["gapAtTermination"]) if row["gapAtTermination"] else None,
                float(row["binarityResidual"]) if row["binarityResidual"] else None,
            ))
    return out


def _subseed(seed: int, scheme_id: str) -> int:
    return int(np.random.SeedSequence(
        [seed, _SCHEME_ORDER.index(scheme_id)]).generate_state(1)[0])


def run_point(cfg: ScenarioConfig, seed: int, schemes) -> dict:
    """One (configuration, seed) cell: sample, synthesize, calibrate, and run
    every requested scheme on the same channels."""
    instance = sample_scenario(cfg, seed=seed)
    codebook = build_codebook(cfg.reflection_grid_size, cfg.wavefront_offsets)
    offline = synth_channels(instance, codebook)
    refined = calibrate_threshold(offline, cfg.preselect_criterion,
                                  cfg.target_mode_set_size, cfg.omega)
    results = {}
    for scheme in schemes:
        start = time.perf_counter()
        try:
            if scheme == "Oracle":
                res = enumerate_optimal(offline, refined, cfg)
            elif scheme == "BnB":
                res = bnb_scheme(offline, refined, cfg)
            elif scheme == "SCA":
                res = sca_scheme(offline, refined, cfg)
            elif scheme == "B1":
                res = baseline_random_mode(offline, refined, cfg,
                                           _subseed(seed, "B1"))
            elif scheme == "B2":
                res = baseline_random_phase(offline, cfg, _subseed(seed, "B2"))
            elif scheme == "B3":
                res = baseline_mrt(offline, cfg)
            elif scheme == "LinearEH":
                res = linear_eh_scheme(offline, refined, cfg)
            elif scheme == "NoIRS":
                res = no_irs_scheme(offline, cfg)
            else:
                raise ValueError(f"unknown scheme {scheme}")
        except ConicSolverError as exc:
            res = SchemeResult(scheme, "NumericalFailure", warnings=[str(exc)])
        res.stats["wall_millis"] = 1e3 * (time.perf_counter() - start)
        results[scheme] = res
    return results


def run_sweep(cfg: ScenarioConfig, sweep_field: str, values, schemes,
              num_seeds: int, out_path=None) -> list:
    """For each (value, seed): run all schemes and append records; partial
    failures become infeasible-marked records, never silent drops."""
    attr = SWEEP_FIELDS.get(sweep_field, sweep_field)
    if attr not in {f.name for f in __import__("dataclasses").fields(ScenarioConfig)}:
        raise UnknownSweepFieldError(f"unknown sweep field: {sweep_field}")
    for scheme in schemes:
        if scheme not in _SCHEME_ORDER:
            raise ValueError(f"unknown scheme {scheme}")
    records = []
    for value in values:
        point_cfg = cfg.replace(**{attr: value})
        for seed in range(num_seeds):
            results = run_point(point_cfg, cfg.seed + seed, schemes)
            for scheme in schemes:
                res = results[scheme]
                records.append(ExperimentRecord(
                    sweep_field, float(value), seed, scheme,
                    res.objective_dbm if res.feasible else None,
                    int(res.stats.get("iterations", res.stats.get("nodes", 1))),
                    res.stats.get("wall_millis", 0.0),
                    res.feasible,
                    res.stats.get("gap") if scheme == "BnB" else None,
                    res.stats.get("binarity_residual") if scheme == "SCA" else None,
                ))
    records.sort(key=lambda r: (r.sweep_value, r.seed, r.scheme_id))
    if out_path is not None:
        emit_records(records, out_path)
    return records


def mean_dbm(records: list, sweep_value: float, scheme_id: str) -> float | None:
    """Mean feasible objective (dB domain) at one sweep point; None when no
    feasible row exists."""
    vals = [r.objective_dbm for r in records
            if r.scheme_id == scheme_id and r.feasible
            and np.isclose(r.sweep_value, sweep_value)]
    return float(np.mean(vals)) if vals else None
