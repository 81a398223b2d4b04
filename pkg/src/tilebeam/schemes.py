"""Solution schemes compared in the benchmark: the enumeration oracle, the
exact branch-and-bound, the penalized convex-approximation solver, three
baselines (random mode + isotropic energy signal, random offline phases,
maximum ratio transmission), a linear-harvest design with power repair, and
the surface-free reference."""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bnb import bnb_solve
from .channels import ChannelSet
from .config import ScenarioConfig, mw_to_dbm
from .conic import NONNEG, PSD, ConicSolverError, ProblemBuilder
from .eh import harvested_power
from .preselect import RefinedModeSet
from .sca import sca_solve
from .sdp import (INFEASIBLE, OPTIMAL, BeamformingSolution, ModeAssignment,
                  _scaled, _solve_with_retry, effective_channel,
                  solve_fixed_assignment, verify_solution)

SCHEME_IDS = ("Oracle", "BnB", "SCA", "B1", "B2", "B3", "LinearEH", "NoIRS")


class EnumerationCapError(RuntimeError):
    pass


@dataclass
class SchemeResult:
    scheme_id: str
    status: str
    objective_mw: float | None = None
    assignment: tuple | None = None
    solution: BeamformingSolution | None = None
    stats: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL

    @property
    def objective_dbm(self) -> float | None:
        return mw_to_dbm(self.objective_mw) if self.objective_mw else None


def _finish(scheme_id, channels, cfg, solution, stats=None, warnings=None):
    if solution is None or not solution.feasible:
        return SchemeResult(scheme_id, INFEASIBLE, stats=stats or {},
                            warnings=warnings or [])
    report = verify_solution(channels, solution.assignment, solution, cfg)
    out = SchemeResult(scheme_id, OPTIMAL, solution.objective_mw,
                       solution.assignment.mode_per_tile, solution,
                       stats or {}, warnings or [])
    out.stats["verify_passed"] = report.passed
    out.stats["worst_slack"] = min(r[3] for r in report.rows)
    return out


def enumerate_optimal(channels: ChannelSet, refined: RefinedModeSet | None,
                      cfg: ScenarioConfig) -> SchemeResult:
    """Exhaustive oracle: solve every assignment in the S^T product and keep
    the cheapest feasible one."""
    ch = channels.subset(refined.mode_indices) if refined is not None else channels
    S, T = ch.num_modes, ch.num_tiles
    total = S ** T
    if total > cfg.enum_cap:
        raise EnumerationCapError(f"{total} assignments exceed cap {cfg.enum_cap}")
    warnings, best = [], None
    solved = 0
    for combo in itertools.product(range(S), repeat=T):
        assignment = ModeAssignment(combo)
        try:
            sol = solve_fixed_assignment(ch, assignment, cfg)
        except ConicSolverError as exc:
            warnings.append(f"assignment {combo}: {exc}")
            continue
        solved += 1
        if sol.feasible and (best is None or sol.objective_mw < best.objective_mw):
            best = sol
    return _finish("Oracle", ch, cfg, best,
                   {"assignments": total, "solved": solved}, warnings)


def bnb_scheme(channels: ChannelSet, refined: RefinedModeSet | None,
               cfg: ScenarioConfig) -> SchemeResult:
    ch = channels.subset(refined.mode_indices) if refined is not None else channels
    res = bnb_solve(ch, None, cfg)
    stats = {"nodes": res.nodes_explored, "fixed_solves": res.fixed_solves,
             "gap": res.gap, "iterations": len(res.trace), "trace": res.trace}
    return _finish("BnB", ch, cfg, res.solution, stats, list(res.warnings))


def sca_scheme(channels: ChannelSet, refined: RefinedModeSet | None,
               cfg: ScenarioConfig) -> SchemeResult:
    ch = channels.subset(refined.mode_indices) if refined is not None else channels
    res = sca_solve(ch, None, cfg)
    stats = {"iterations": res.iterations, "binarity_residual": res.binarity_residual,
             "converged": res.converged, "trace": res.trace}
    return _finish("SCA", ch, cfg, res.solution, stats, list(res.warnings))


def baseline_random_mode(channels: ChannelSet, refined: RefinedModeSet | None,
                         cfg: ScenarioConfig, seed: int) -> SchemeResult:
    """Baseline 1: uniformly random mode per tile from the refined set, with
    the energy covariance restricted to an isotropic q*I pattern."""
    ch = channels.subset(refined.mode_indices) if refined is not None else channels
    rng = np.random.default_rng(seed)
    assignment = ModeAssignment(tuple(int(rng.integers(ch.num_modes))
                                      for _ in range(ch.num_tiles)))
    try:
        sol = solve_fixed_assignment(ch, assignment, cfg, isotropic_energy=True)
    except ConicSolverError as exc:
        return SchemeResult("B1", INFEASIBLE, warnings=[str(exc)])
    return _finish("B1", ch, cfg, sol if sol.feasible else None,
                   {"assignment_seed": seed})


def baseline_random_phase(channels_offline: ChannelSet, cfg: ScenarioConfig,
                          seed: int) -> SchemeResult:
    """Baseline 2: independently random mode per tile from the full offline
    codebook (random surface phases within the tile/mode model)."""
    rng = np.random.default_rng(seed)
    assignment = ModeAssignment(tuple(int(rng.integers(channels_offline.num_modes))
                                      for _ in range(channels_offline.num_tiles)))
    try:
        sol = solve_fixed_assignment(channels_offline, assignment, cfg)
    except ConicSolverError as exc:
        return SchemeResult("B2", INFEASIBLE, warnings=[str(exc)])
    return _finish("B2", channels_offline, cfg, sol if sol.feasible else None,
                   {"assignment_seed": seed, "codebook": "offline"})


def mrt_mode_choice(channels_offline: ChannelSet) -> ModeAssignment:
    """Per tile, the offline mode whose channel has the largest Euclidean
    norm over all receivers."""
    S, T = channels_offline.num_modes, channels_offline.num_tiles
    norms = np.zeros((S, T))
    for kind, i in channels_offline.receivers():
        norms = np.maximum(
            norms, np.linalg.norm(channels_offline.vectors(kind, i)[:, 1:, :], axis=2))
    return ModeAssignment(tuple(int(np.argmax(norms[:, t])) for t in range(T)))


def baseline_mrt(channels_offline: ChannelSet, cfg: ScenarioConfig) -> SchemeResult:
    """Baseline 3: largest-norm offline mode per tile; beams fixed to maximum
    ratio transmission, only per-user powers and the energy covariance are
    optimized."""
    ch = channels_offline
    assignment = mrt_mode_choice(ch)
    K, J, n = ch.num_irs, ch.num_ers, ch.num_antennas
    alpha, mu, sigma2, preq = _scaled(ch, cfg)
    g_ir = [alpha * effective_channel(ch, assignment, "ir", k) for k in range(K)]
    g_er = [alpha * effective_channel(ch, assignment, "er", j) for j in range(J)]
    beams = [g / np.linalg.norm(g) for g in g_ir]

    b = ProblemBuilder()
    p_block = b.add_block(NONNEG, K, "p")
    v_block = b.add_block(PSD, n, "V")
    eye = np.eye(n, dtype=complex)
    gamma = cfg.sinr_targets
    for k in range(K):
        coords = [b.scalar_coord(p_block, r) for r in range(K)]
        coeffs = [abs(np.vdot(beams[r], g_ir[k])) ** 2 for r in range(K)]
        coeffs[k] = float(np.linalg.norm(g_ir[k]) ** 2) / gamma[k]
        for r in range(K):
            if r != k:
                coeffs[r] = -coeffs[r]
        vc, vv = b.trace_entries(v_block, np.outer(g_ir[k], g_ir[k].conj()))
        row_coords = np.concatenate([np.array(coords), vc])
        row_coeffs = np.concatenate([np.array(coeffs),
                                     np.zeros_like(vv) if cfg.cancel_energy_interference else -vv])
        b.add_row(row_coords, row_coeffs, ">=", sigma2, f"sinr[{k}]")
    for j in range(J):
        coords = [b.scalar_coord(p_block, r) for r in range(K)]
        coeffs = [abs(np.vdot(beams[r], g_er[j])) ** 2 for r in range(K)]
        vc, vv = b.trace_entries(v_block, np.outer(g_er[j], g_er[j].conj()))
        b.add_row(np.concatenate([np.array(coords), vc]),
                  np.concatenate([np.array(coeffs), vv]), ">=", preq[j],
                  f"harvest[{j}]")
    tc = [b.scalar_coord(p_block, k) for k in range(K)]
    tv = [1.0] * K
    vc, vv = b.trace_entries(v_block, eye)
    all_c = np.concatenate([np.array(tc), vc])
    all_v = np.concatenate([np.array(tv), vv])
    b.add_objective(all_c, all_v)
    b.add_row(all_c, all_v, "<=", cfg.max_power_mw / mu, "budget")
    sol = _solve_with_retry(b.build(), cfg.solver_tol)
    if sol.status == INFEASIBLE:
        return SchemeResult("B3", INFEASIBLE, assignment=assignment.mode_per_tile)
    if not sol.optimal:
        raise ConicSolverError(f"maximum-ratio baseline solve failed: {sol.diagnostics}")
    powers = np.maximum(mu * sol.block_values["p"], 0.0)
    V = mu * sol.block_values["V"]
    # unit beams from the scaled channels point the same way in physical units
    W = [float(powers[k]) * np.outer(beams[k], beams[k].conj()) for k in range(K)]
    out = BeamformingSolution(OPTIMAL, assignment=assignment,
                              iterations=sol.iterations, solve_time=sol.solve_time)
    out.W, out.V = W, V
    out.objective_mw = float(sum(powers) + np.trace(V).real)
    out.w = [math.sqrt(float(powers[k])) * beams[k] for k in range(K)]
    out.rank_ratios = [0.0] * K
    from .sdp import received_rf_power, sinr
    out.sinr = [sinr(ch, assignment, out, k, cfg) for k in range(K)]
    out.rf_uw = [received_rf_power(ch, assignment, out, j) for j in range(J)]
    out.harvested_uw = [harvested_power(p, prm)
                        for p, prm in zip(out.rf_uw, cfg.eh_params)]
    return _finish("B3", ch, cfg, out, {"codebook": "offline"})


def linear_eh_scheme(channels: ChannelSet, refined: RefinedModeSet | None,
                     cfg: ScenarioConfig) -> SchemeResult:
    """Design under a linear harvest model (efficiency matching the true
    curve at its inflection by default), then scale the whole transmit
    covariance up by bisection until the actual non-linear harvest targets
    are met."""
    ch = channels.subset(refined.mode_indices) if refined is not None else channels
    J = ch.num_ers
    etas = []
    for prm in cfg.eh_params:
        if cfg.eh_linear_efficiency is not None:
            etas.append(cfg.eh_linear_efficiency)
        else:
            etas.append(harvested_power(prm.c, prm) / prm.c)
    preq_lin_mw = [e / eta * 1e-3 for e, eta in zip(cfg.min_harvest_uw, etas)]
    res = sca_solve(ch, None, cfg, preq_override_mw=preq_lin_mw)
    if not res.feasible:
        return SchemeResult("LinearEH", INFEASIBLE, warnings=list(res.warnings))
    sol = res.solution
    assignment = sol.assignment

    def harvest_ok(scale: float) -> bool:
        return all(harvested_power(scale * rf, prm) >= target - 1e-12
                   for rf, prm, target in zip(sol.rf_uw, cfg.eh_params,
                                              cfg.min_harvest_uw))

    scale = 1.0
    if J and not harvest_ok(1.0):
        budget_scale = cfg.max_power_mw / sol.objective_mw
        if not harvest_ok(budget_scale):
            return SchemeResult("LinearEH", INFEASIBLE,
                                warnings=["harvest repair exceeds the power budget"])
        lo, hi = 1.0, budget_scale
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if harvest_ok(mid):
                hi = mid
            else:
                lo = mid
        scale = hi
    repaired = BeamformingSolution(OPTIMAL, assignment=assignment,
                                   iterations=sol.iterations)
    repaired.W = [scale * w for w in sol.W]
    repaired.V = scale * sol.V
    repaired.objective_mw = scale * sol.objective_mw
    repaired.w = [math.sqrt(scale) * w for w in sol.w]
    repaired.rank_ratios = list(sol.rank_ratios)
    from .sdp import received_rf_power, sinr
    repaired.sinr = [sinr(ch, assignment, repaired, k, cfg)
                     for k in range(ch.num_irs)]
    repaired.rf_uw = [received_rf_power(ch, assignment, repaired, j)
                      for j in range(J)]
    repaired.harvested_uw = [harvested_power(p, prm)
                             for p, prm in zip(repaired.rf_uw, cfg.eh_params)]
    return _finish("LinearEH", ch, cfg, repaired,
                   {"repair_scale": scale, "iterations": res.iterations})


def no_irs_scheme(channels: ChannelSet, cfg: ScenarioConfig) -> SchemeResult:
    """Reference system without the reflecting surface: direct links only."""
    direct = ChannelSet(channels.h_ir[:, :1, :1, :], channels.h_er[:, :1, :1, :],
                        (channels.mode_indices[0],))
    try:
        sol = solve_fixed_assignment(direct, ModeAssignment(()), cfg)
    except ConicSolverError as exc:
        return SchemeResult("NoIRS", INFEASIBLE, warnings=[str(exc)])
    return _finish("NoIRS", direct, cfg, sol if sol.feasible else None)
