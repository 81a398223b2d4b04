"""Batch command line: solve one instance, sweep a parameter over Monte
Carlo draws, or run the exact-solver-versus-enumeration check."""

import argparse
import json
import sys

import numpy as np

from .bench import SWEEP_FIELDS, run_point, run_sweep
from .bnb import trace_to_csv
from .channels import synth_channels
from .codebook import build_codebook
from .config import ScenarioConfig, load_config
from .preselect import calibrate_threshold
from .sca import sca_trace_to_csv
from .scenario import sample_scenario
from .schemes import SCHEME_IDS, bnb_scheme, enumerate_optimal


def _parse_set(pairs):
    out = {}
    for pair in pairs or []:
        key, _, value = pair.partition("=")
        if not _:
            raise SystemExit(f"--set expects KEY=VALUE, got {pair!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _load(args) -> ScenarioConfig:
    overrides = _parse_set(getattr(args, "set", None))
    if getattr(args, "criterion", None) is not None:
        overrides["preselectCriterion"] = args.criterion
    if getattr(args, "omega", None) is not None:
        overrides["omega"] = args.omega
    if getattr(args, "enum_cap", None) is not None:
        overrides["enumCap"] = args.enum_cap
    return load_config(args.config, overrides)


def cmd_solve(args) -> int:
    cfg = _load(args)
    seed = cfg.seed if args.seed is None else args.seed
    results = run_point(cfg, seed, [args.scheme])
    res = results[args.scheme]
    print(f"scheme   : {res.scheme_id}")
    print(f"status   : {res.status}")
    if res.feasible:
        print(f"objective: {res.objective_dbm:.4f} dBm ({res.objective_mw:.6g} mW)")
        print(f"assignment (refined-set mode per tile): {res.assignment}")
        sol = res.solution
        for k, s in enumerate(sol.sinr):
            print(f"  sinr[{k}]      = {10*np.log10(s):.3f} dB "
                  f"(target {cfg.min_sinr_db[k]:.3f} dB)")
        for j, (rf, eh) in enumerate(zip(sol.rf_uw, sol.harvested_uw)):
            print(f"  harvest[{j}]   = {eh:.4f} uW from {rf:.2f} uW RF "
                  f"(target {cfg.min_harvest_uw[j]:.3f} uW)")
        print(f"  rank ratios = {['%.2e' % r for r in sol.rank_ratios]}")
        print(f"  verify pass = {res.stats.get('verify_passed')}")
    for warning in res.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.trace:
        trace = res.stats.get("trace")
        if trace and res.scheme_id == "BnB":
            trace_to_csv(trace, args.trace)
        elif trace and res.scheme_id == "SCA":
            sca_trace_to_csv(trace, args.trace)
        print(f"trace written to {args.trace}")
    return 0 if res.feasible else 1


def cmd_sweep(args) -> int:
    cfg = _load(args)
    field, _, values = args.sweep.partition("=")
    if not values:
        raise SystemExit("--sweep expects FIELD=v1,v2,...")
    vals = [float(v) for v in values.split(",")]
    schemes = args.schemes.split(",")
    records = run_sweep(cfg, field, vals, schemes, args.seeds, args.out)
    feasible = sum(r.feasible for r in records)
    print(f"{len(records)} records ({feasible} feasible) -> {args.out}")
    return 0


def cmd_oracle_check(args) -> int:
    """Exact-solver equivalence: on every seeded instance the tree search
    must match exhaustive enumeration within the stated tolerance."""
    cfg = _load(args)
    codebook = build_codebook(cfg.reflection_grid_size, cfg.wavefront_offsets)
    failures = 0
    for seed in range(args.instances):
        instance = sample_scenario(cfg, seed=cfg.seed + seed)
        offline = synth_channels(instance, codebook)
        refined = calibrate_threshold(offline, cfg.preselect_criterion,
                                      cfg.target_mode_set_size, cfg.omega)
        oracle = enumerate_optimal(offline, refined, cfg)
        tree = bnb_scheme(offline, refined, cfg)
        if oracle.feasible != tree.feasible:
            print(f"seed {seed}: status mismatch "
                  f"(oracle {oracle.status}, search {tree.status})")
            failures += 1
            continue
        if not oracle.feasible:
            print(f"seed {seed}: both infeasible")
            continue
        rel = abs(tree.objective_mw - oracle.objective_mw) / oracle.objective_mw
        ok = rel <= args.tolerance
        failures += not ok
        print(f"seed {seed}: oracle {oracle.objective_dbm:.4f} dBm, "
              f"search {tree.objective_dbm:.4f} dBm, rel {rel:.2e} "
              f"{'ok' if ok else 'VIOLATION'}")
    print(f"{args.instances - failures}/{args.instances} instances agree")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilebeam",
        description="Joint beamforming and reflecting-surface mode selection "
                    "for wireless information and power transfer")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--criterion", type=int, choices=(1, 2, 3),
                        help="mode pre-selection criterion")
    common.add_argument("--omega", type=float, help="criterion-3 weight factor")
    common.add_argument("--enum-cap", type=int, help="enumeration size cap")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config field (repeatable)")

    p_solve = sub.add_parser("solve", parents=[common],
                             help="solve one instance with one scheme")
    p_solve.add_argument("--scheme", default="SCA", choices=SCHEME_IDS)
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--trace", default=None,
                         help="write the solver trace CSV here")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run schemes over a parameter sweep")
    p_sweep.add_argument("--sweep", required=True, metavar="FIELD=v1,v2,...",
                         help=f"sweepable: {', '.join(sorted(SWEEP_FIELDS))}")
    p_sweep.add_argument("--schemes", default="SCA,B1,B2,B3")
    p_sweep.add_argument("--seeds", type=int, default=20)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("oracle-check", parents=[common],
                             help="exact solver vs enumeration, nonzero exit "
                                  "on any violation")
    p_check.add_argument("--instances", type=int, default=20)
    p_check.add_argument("--tolerance", type=float, default=1e-4)
    p_check.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
