"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Campaign configuration: 20 seeded instances with one receiver of each kind,
4 antennas, 2 tiles, a refined set of 3 modes, and tight convergence
tolerances.  The power budget is set high (90 dBm) so the harvest targets
are attainable on every draw: the default harvest thresholds demand
milliwatts of received RF through ~-50 dB effective channels, and the
original problem formulation carries no budget at all.

Trend configuration: two receivers of each kind at desk scale, solver
tolerance relaxed to 1e-6 (bound tightness is irrelevant for trend means).
"""

import itertools
import pathlib

import numpy as np
import pytest

from tilebeam.bench import mean_dbm, run_sweep
from tilebeam.bnb import bnb_solve, trace_to_csv
from tilebeam.channels import synth_channels
from tilebeam.codebook import build_codebook
from tilebeam.config import ScenarioConfig
from tilebeam.eh import (EHParams, harvest_constraint_constant, harvested_power,
                         required_rf_power)
from tilebeam.preselect import calibrate_threshold, mode_scores, refine_modes
from tilebeam.scenario import sample_scenario
from tilebeam.schemes import (baseline_mrt, baseline_random_mode,
                              baseline_random_phase, enumerate_optimal,
                              linear_eh_scheme, no_irs_scheme)
from tilebeam.sca import sca_solve
from tilebeam.sdp import LiftedModel, ModeAssignment, solve_fixed_assignment, \
    verify_solution

ACCEPT_CFG = ScenarioConfig(num_irs=1, num_ers=1, num_antennas=4, num_tiles=2,
                            target_mode_set_size=3, max_power_dbm=90.0,
                            eps_bnb=1e-4, eps_sca=1e-4)
DESK_CFG = ScenarioConfig(num_irs=2, num_ers=2, num_antennas=4, num_tiles=2,
                          target_mode_set_size=4, max_power_dbm=90.0,
                          solver_tol=1e-6)
SEEDS = range(20)
ARTIFACTS = pathlib.Path(__file__).parent / "_artifacts"


def _report(criterion: int, passed: bool, detail: str):
    import conftest
    line = f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert passed, detail


@pytest.fixture(scope="session")
def campaign():
    """Oracle enumeration, tree search, convex approximation, and every
    comparison scheme on the 20 seeded acceptance instances."""
    ARTIFACTS.mkdir(exist_ok=True)
    codebook = build_codebook(ACCEPT_CFG.reflection_grid_size,
                              ACCEPT_CFG.wavefront_offsets)
    out = []
    for seed in SEEDS:
        inst = sample_scenario(ACCEPT_CFG, seed=seed)
        offline = synth_channels(inst, codebook)
        refined = calibrate_threshold(offline, 1, ACCEPT_CFG.target_mode_set_size)
        ch = offline.subset(refined.mode_indices)
        cell = {"seed": seed, "channels": ch, "offline": offline,
                "refined": refined}

        solves, ranks = {}, []
        for combo in itertools.product(range(ch.num_modes), repeat=ch.num_tiles):
            sol = solve_fixed_assignment(ch, ModeAssignment(combo), ACCEPT_CFG)
            solves[combo] = sol
            if sol.feasible:
                ranks.extend(sol.rank_ratios)
        feasible = {c: s.objective_mw for c, s in solves.items() if s.feasible}
        cell["fixed"] = solves
        cell["oracle_obj"] = min(feasible.values()) if feasible else None
        cell["oracle_assign"] = (min(feasible, key=feasible.get)
                                 if feasible else None)

        model = LiftedModel(ch, ACCEPT_CFG)
        if cell["oracle_assign"] is not None:
            fixings = {(s, t + 1): (1 if s == cell["oracle_assign"][t] else 0)
                       for s in range(ch.num_modes) for t in range(ch.num_tiles)}
            binary_relax = model.solve(fixings)
            if binary_relax.feasible:
                ranks.extend(binary_relax.rank_ratios)
        cell["rank_ratios"] = ranks

        cell["bnb"] = bnb_solve(ch, None, ACCEPT_CFG)
        cell["sca"] = sca_solve(ch, None, ACCEPT_CFG)
        cell["b1"] = baseline_random_mode(offline, refined, ACCEPT_CFG, 1000 + seed)
        cell["b2"] = baseline_random_phase(offline, ACCEPT_CFG, 2000 + seed)
        cell["b3"] = baseline_mrt(offline, ACCEPT_CFG)
        cell["lineh"] = linear_eh_scheme(offline, refined, ACCEPT_CFG)
        cell["noirs"] = no_irs_scheme(offline, ACCEPT_CFG)
        out.append(cell)
    trace_to_csv(out[0]["bnb"].trace, ARTIFACTS / "bnb_trace_seed0.csv")
    return out


@pytest.fixture(scope="session")
def trend_records():
    ARTIFACTS.mkdir(exist_ok=True)
    schemes = ["SCA", "B1", "B2", "B3"]
    sweeps = {
        "minSINR": [4.0, 6.0, 8.0, 10.0],
        "targetModeSetSize": [2, 4, 6, 8],
        "numAntennas": [4, 6, 8],
    }
    records = {}
    for field, values in sweeps.items():
        records[field] = run_sweep(DESK_CFG, field, values, schemes, 20,
                                   out_path=ARTIFACTS / f"sweep_{field}.csv")
    return records


def test_criterion_1_oracle_equivalence(campaign):
    worst_rel, mismatches = 0.0, []
    for cell in campaign:
        bnb = cell["bnb"]
        if cell["oracle_obj"] is None:
            if bnb.feasible:
                mismatches.append((cell["seed"], "oracle infeasible, search not"))
            continue
        if not bnb.feasible:
            mismatches.append((cell["seed"], "search infeasible, oracle not"))
            continue
        rel = abs(bnb.objective_mw - cell["oracle_obj"]) / cell["oracle_obj"]
        worst_rel = max(worst_rel, rel)
        if rel > 1e-4:
            mismatches.append((cell["seed"], f"objective off by {rel:.2e}"))
        # assignments must agree whenever the optimum is unique by margin
        feasible = sorted(v for k, v in
                          ((c, s.objective_mw) for c, s in cell["fixed"].items()
                           if s.feasible))
        if len(feasible) > 1:
            margin = (feasible[1] - feasible[0]) / feasible[0]
            if margin > 1e-6 and bnb.assignment.mode_per_tile != cell["oracle_assign"]:
                mismatches.append((cell["seed"], "assignment differs at unique optimum"))
    _report(1, not mismatches,
            f"search equals enumeration on {len(campaign)} instances "
            f"(worst relative deviation {worst_rel:.2e}) {mismatches}")


def test_criterion_2_rank_one(campaign):
    worst = 0.0
    count = 0
    for cell in campaign:
        for r in cell["rank_ratios"]:
            worst = max(worst, r)
            count += 1
        if cell["bnb"].feasible:
            worst = max(worst, max(cell["bnb"].solution.rank_ratios))
    _report(2, worst <= 1e-6,
            f"second/first eigenvalue ratio <= 1e-6 across {count} "
            f"fixed-assignment and binary-relaxation solves (worst {worst:.2e})")


def test_criterion_3_bound_monotonicity(campaign):
    bad = []
    for cell in campaign:
        res = cell["bnb"]
        if not res.feasible:
            continue
        L = [r.lower_mw for r in res.trace]
        U = [r.upper_mw for r in res.trace]
        if not all(b >= a - 1e-9 * abs(a) for a, b in zip(L, L[1:])):
            bad.append((cell["seed"], "lower bound decreased"))
        if not all(b <= a + 1e-9 * abs(a) for a, b in zip(U, U[1:])):
            bad.append((cell["seed"], "upper bound increased"))
        if not all(l <= u + 1e-9 * abs(u) for l, u in
                   zip(L, U) if np.isfinite(u)):
            bad.append((cell["seed"], "lower exceeded upper"))
        if (U[-1] - L[-1]) > ACCEPT_CFG.eps_bnb * L[-1] + 1e-12:
            bad.append((cell["seed"], "final gap above tolerance"))
    _report(3, not bad, f"all search traces monotone with final gap <= "
                        f"{ACCEPT_CFG.eps_bnb} {bad}")


def test_criterion_4_sca_quality(campaign):
    worst_db, worst_resid, bad = 0.0, 0.0, []
    for cell in campaign:
        sca, bnb = cell["sca"], cell["bnb"]
        if not bnb.feasible:
            if sca.feasible:
                bad.append((cell["seed"], "sca feasible where search infeasible"))
            continue
        if not sca.feasible:
            bad.append((cell["seed"], "sca infeasible"))
            continue
        db = 10 * np.log10(sca.objective_mw / bnb.objective_mw)
        worst_db = max(worst_db, db)
        if db > 0.5:
            bad.append((cell["seed"], f"{db:.3f} dB above the optimum"))
        f = [r.penalized_mw for r in sca.trace]
        if not all(b <= a * (1 + 1e-7) for a, b in zip(f, f[1:])):
            bad.append((cell["seed"], "objective not non-increasing"))
        worst_resid = max(worst_resid, abs(sca.binarity_residual))
        if abs(sca.binarity_residual) > 1e-3:
            bad.append((cell["seed"], "binarity residual above 1e-3"))
    _report(4, not bad,
            f"suboptimal solver within 0.5 dB (worst +{worst_db:.4f} dB), "
            f"monotone descent, binarity residual <= 1e-3 "
            f"(worst {worst_resid:.2e}) {bad}")


def test_criterion_5_eh_model():
    params = EHParams(20.0, 6400.0, 0.003)
    ok, details = True, []
    for e in (0.1, 1.0, 5.0, 10.0, 15.0, 19.0):
        p = required_rf_power(e, params)
        back = harvested_power(p, params)
        if abs(back - e) > 1e-9 * e:
            ok = False
            details.append(f"round trip failed at {e}")
    p10 = required_rf_power(10.0, params)
    if not (6399.9 <= p10 <= 6400.1):
        ok = False
        details.append(f"required power at half saturation: {p10}")
    c_req = harvest_constraint_constant(10.0, params)
    for p in np.linspace(0.0, 3 * p10, 100):
        exp_form = c_req >= np.exp(-params.rho * p) * (1 - 1e-9)
        log_form = p >= p10 * (1 - 1e-9)
        if exp_form != log_form:
            ok = False
            details.append(f"log/exponential forms disagree at {p}")
            break
    _report(5, ok, f"harvest inversion exact, threshold {p10:.6f} uW, "
                   f"log-domain form equivalent {details}")


def test_criterion_6_trends(trend_records):
    bad = []
    means = {}
    for field, values in (("minSINR", [4.0, 6.0, 8.0, 10.0]),
                          ("targetModeSetSize", [2, 4, 6, 8]),
                          ("numAntennas", [4, 6, 8])):
        recs = trend_records[field]
        means[field] = [mean_dbm(recs, v, "SCA") for v in values]
        for scheme in ("B1", "B2", "B3"):
            for v in values:
                base = mean_dbm(recs, v, scheme)
                ours = mean_dbm(recs, v, "SCA")
                if base is None or ours is None or ours > base + 1e-9:
                    bad.append((field, v, scheme, "baseline mean below ours"))
    seq = means["minSINR"]
    if any(b < a - 1e-9 for a, b in zip(seq, seq[1:])):
        bad.append(("minSINR", "mean power not non-decreasing", seq))
    for field in ("targetModeSetSize", "numAntennas"):
        seq = means[field]
        if any(b > a + 1e-9 for a, b in zip(seq, seq[1:])):
            bad.append((field, "mean power not non-increasing", seq))
    detail = {k: [None if m is None else round(m, 2) for m in v]
              for k, v in means.items()}
    _report(6, not bad, f"mean power trends and baseline dominance hold: "
                        f"{detail} {bad}")


def test_criterion_7_dominance_and_feasibility(campaign):
    bad = []
    for cell in campaign:
        seed = cell["seed"]
        oracle = cell["oracle_obj"]
        for key in ("bnb", "sca"):
            res = cell[key]
            if res.feasible:
                rep = verify_solution(cell["channels"], res.assignment,
                                      res.solution, ACCEPT_CFG)
                if not rep.passed:
                    bad.append((seed, key, "verification failed"))
        for key in ("b1", "b2", "b3", "lineh", "noirs"):
            res = cell[key]
            if res.feasible and not res.stats.get("verify_passed", False):
                bad.append((seed, key, "verification failed"))
            if res.feasible and oracle is not None and key in ("b1",):
                if res.objective_mw < oracle * (1 - 1e-6):
                    bad.append((seed, key, "beat the oracle"))
        # offline-codebook schemes dominate the offline-codebook optimum,
        # which the refined-set oracle lower-bounds only through its subset
        if cell["lineh"].feasible and cell["sca"].feasible:
            if cell["lineh"].objective_mw < cell["sca"].objective_mw * (1 - 1e-6):
                bad.append((seed, "lineh", "beat the non-linear design"))
    _report(7, not bad, f"all reported solutions verify; restricted schemes "
                        f"never beat their oracle {bad}")


def test_criterion_8_no_irs_gap(campaign):
    from tilebeam.config import mw_to_dbm
    sca_db, noirs_db = [], []
    for cell in campaign:
        if cell["sca"].feasible and cell["noirs"].feasible:
            sca_db.append(mw_to_dbm(cell["sca"].objective_mw))
            noirs_db.append(mw_to_dbm(cell["noirs"].objective_mw))
    gap = float(np.mean(noirs_db) - np.mean(sca_db))
    _report(8, gap >= 6.0,
            f"surface-free reference needs {gap:.2f} dB more mean power "
            f"than the suboptimal scheme over {len(sca_db)} seeds (floor 6 dB)")


def test_criterion_9_preselection(campaign):
    offline = campaign[0]["offline"]
    ok, details = True, []
    scores = mode_scores(offline, 1)
    delta = float(np.quantile(scores, 0.6))
    c1 = refine_modes(offline, 1, {"delta1": delta})
    c3 = refine_modes(offline, 3, {"delta1": delta, "omega": 1.0})
    if c1.mode_indices != c3.mode_indices:
        ok = False
        details.append("criterion 3 at unit weight differs from criterion 1")
    for crit in (1, 2, 3):
        for target in (2, 4, 8, 16):
            got = calibrate_threshold(offline, crit, target, omega=2.0)
            if got.size != target:
                ok = False
                details.append(f"criterion {crit} size {target} -> {got.size}")
    for crit in (1, 3):
        small = set(calibrate_threshold(offline, crit, 4, omega=2.0).mode_indices)
        big = set(calibrate_threshold(offline, crit, 8, omega=2.0).mode_indices)
        if not small <= big:
            ok = False
            details.append(f"criterion {crit} top-k not nested")
    _report(9, ok, f"pre-selection identities and exact-size calibration {details}")
