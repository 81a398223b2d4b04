"""Transmission-mode pre-selection: refine the offline codebook down to the
online set, either by thresholding (three criteria) or by calibrating the
thresholds to hit an exact target size."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet


class OverRestrictiveThresholdError(ValueError):
    """Thresholds left the refined mode set empty."""


@dataclass(frozen=True)
class RefinedModeSet:
    mode_indices: tuple   # sorted ascending, indices into the offline codebook
    criterion: int        # 1, 2 or 3
    parameters: dict      # delta(s) / omega actually applied

    def __post_init__(self):
        if not self.mode_indices:
            raise OverRestrictiveThresholdError("refined mode set is empty")
        if list(self.mode_indices) != sorted(set(self.mode_indices)):
            raise ValueError("mode indices must be sorted and unique")

    @property
    def size(self) -> int:
        return len(self.mode_indices)


def _norms(channels: ChannelSet) -> dict:
    """Per-receiver norm tables over physical tiles: {(kind,i): (S, T)}."""
    out = {}
    for kind, i in channels.receivers():
        out[(kind, i)] = np.linalg.norm(channels.vectors(kind, i)[:, 1:, :], axis=2)
    return out


def _weighted(norms: dict, kind: str, omega: float) -> dict:
    return {key: (omega * v if key[0] == "er" and kind == "weighted" else v)
            for key, v in norms.items()}


def refine_modes(channels: ChannelSet, criterion: int, params: dict) -> RefinedModeSet:
    """Threshold-based refinement.

    Criterion 1 keeps mode s if any (receiver, tile) norm reaches delta1.
    Criterion 2 unions per-receiver sets, each with its own delta2.
    Criterion 3 is criterion 1 on norms with energy receivers weighted by omega.
    """
    norms = _norms(channels)
    S = channels.num_modes
    if criterion == 1:
        delta1 = params["delta1"]
        keep = [s for s in range(S)
                if any(v[s].max() >= delta1 for v in norms.values())]
        applied = {"delta1": delta1}
    elif criterion == 2:
        delta2 = params["delta2"]
        keep_set = set()
        for key, v in norms.items():
            d = delta2[key] if isinstance(delta2, dict) else delta2
            keep_set |= {s for s in range(S) if v[s].max() >= d}
        keep = sorted(keep_set)
        applied = {"delta2": delta2}
    elif criterion == 3:
        delta1 = params["delta1"]
        omega = params.get("omega", 1.0)
        if omega < 1.0:
            raise ValueError(f"omega must be >= 1, got {omega}")
        keep = [s for s in range(S)
                if any((omega if key[0] == "er" else 1.0) * v[s].max() >= delta1
                       for key, v in norms.items())]
        applied = {"delta1": delta1, "omega": omega}
    else:
        raise ValueError(f"unknown pre-selection criterion {criterion}")
    if not keep:
        raise OverRestrictiveThresholdError(
            f"criterion {criterion} with {params} keeps no transmission mode")
    return RefinedModeSet(tuple(keep), criterion, applied)


def mode_scores(channels: ChannelSet, criterion: int, omega: float = 1.0) -> np.ndarray:
    """Per-mode calibration score: max over receivers and physical tiles of
    the (criterion-weighted) channel norm."""
    norms = _norms(channels)
    S = channels.num_modes
    scores = np.zeros(S)
    for key, v in norms.items():
        w = omega if (criterion == 3 and key[0] == "er") else 1.0
        scores = np.maximum(scores, w * v.max(axis=1))
    return scores


def calibrate_threshold(channels: ChannelSet, criterion: int, s_target: int,
                        omega: float = 1.0) -> RefinedModeSet:
    """Size-targeted refinement: returns exactly ``s_target`` modes.

    Criteria 1/3 take the top-k by score (ties to the lower mode index), which
    makes growing targets nested.  Criterion 2 first fills per-receiver quotas
    of ceil(s_target / num_receivers) in per-receiver score order, dedupes,
    then trims (or tops up) to the target by global score.
    """
    S = channels.num_modes
    if not (1 <= s_target <= S):
        raise ValueError(f"target size {s_target} outside [1, {S}]")
    scores = mode_scores(channels, criterion, omega)
    global_order = sorted(range(S), key=lambda s: (-scores[s], s))
    if criterion in (1, 3):
        keep = sorted(global_order[:s_target])
        applied = {"delta1": float(scores[global_order[s_target - 1]])}
        if criterion == 3:
            applied["omega"] = omega
        return RefinedModeSet(tuple(keep), criterion, applied)
    if criterion != 2:
        raise ValueError(f"unknown pre-selection criterion {criterion}")
    norms = _norms(channels)
    quota = math.ceil(s_target / max(len(norms), 1))
    chosen = set()
    deltas = {}
    for key, v in norms.items():
        per = v.max(axis=1)
        order = sorted(range(S), key=lambda s: (-per[s], s))[:quota]
        deltas[key] = float(min(per[s] for s in order))
        chosen |= set(order)
    pool = sorted(chosen, key=lambda s: (-scores[s], s))
    if len(pool) >= s_target:
        keep = pool[:s_target]
    else:
        extra = [s for s in global_order if s not in chosen]
        keep = pool + extra[: s_target - len(pool)]
    return RefinedModeSet(tuple(sorted(keep)), 2, {"delta2": deltas})


def dump_scores(channels: ChannelSet, refined: RefinedModeSet, path,
                omega: float = 1.0) -> None:
    """Audit CSV of per-mode scores and membership in the refined set."""
    scores = mode_scores(channels, refined.criterion, omega)
    selected = set(refined.mode_indices)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "score", "selected"])
        for s in range(channels.num_modes):
            writer.writerow([s, f"{scores[s]:.12g}", int(s in selected)])
