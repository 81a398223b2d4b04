"""Globally optimal joint beamforming and transmission-mode selection:
best-first branch-and-bound over the lifted big-M relaxation.

Node bounds: lower from the relaxation under the node's fixings, upper from
re-solving the rounded assignment exactly.  One-fixings propagate the tile's
remaining modes to zero; fully determined nodes are bounded by the exact
fixed-assignment solve directly.  Numerical failures retry once, then the
node is pruned with a warning recorded in the result.
"""

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .config import ScenarioConfig
from .conic import ConicSolverError
from .preselect import RefinedModeSet
from .sdp import (INFEASIBLE, OPTIMAL, BeamformingSolution, LiftedModel,
                  ModeAssignment, RelaxedSolution, solve_fixed_assignment)


@dataclass
class BnBNode:
    fixings: dict
    lower_bound: float
    relaxed: RelaxedSolution | None
    rounded: ModeAssignment | None
    upper_value: float
    depth: int


@dataclass
class TraceRow:
    iteration: int
    lower_mw: float
    upper_mw: float
    open_nodes: int


@dataclass
class BnBResult:
    status: str
    assignment: ModeAssignment | None
    solution: BeamformingSolution | None
    objective_mw: float | None
    gap: float
    trace: list
    nodes_explored: int
    fixed_solves: int
    warnings: list = field(default_factory=list)
    infeasible_assignments: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


def round_relaxed(b_tilde: np.ndarray) -> ModeAssignment:
    """Per tile, the mode with the largest relaxed value; ties to the lowest
    index.  Binary inputs round to themselves."""
    return ModeAssignment(tuple(int(np.argmax(b_tilde[:, t]))
                                for t in range(b_tilde.shape[1])))


def select_branch(b_tilde: np.ndarray, rounded: ModeAssignment,
                  fixings: dict | None = None):
    """Most fractional free entry: argmax |b~ - rounded b| over entries not
    already fixed; ties lexicographic in (mode, tile).  Returns None when all
    free entries are already binary (leaf signal)."""
    fixings = fixings or {}
    S, T = b_tilde.shape
    b_bar = np.zeros_like(b_tilde)
    for t, s in enumerate(rounded.mode_per_tile):
        b_bar[s, t] = 1.0
    determined = set()
    for t in range(1, T + 1):
        if any(fixings.get((s, t)) == 1 for s in range(S)) or \
                sum(fixings.get((s, t)) == 0 for s in range(S)) == S - 1:
            determined.add(t)
    best, best_gap = None, 0.0
    for s in range(S):
        for t in range(1, T + 1):
            if (s, t) in fixings or t in determined:
                continue
            gap = abs(b_tilde[s, t - 1] - b_bar[s, t - 1])
            if gap > best_gap + 1e-12:
                best, best_gap = (s, t), gap
    if best is None or best_gap <= 1e-9:
        return None
    return best


def _determined_assignment(fixings: dict, S: int, T: int) -> ModeAssignment | None:
    """The complete assignment implied by the fixings, or None."""
    modes = []
    for t in range(1, T + 1):
        ones = [s for s in range(S) if fixings.get((s, t)) == 1]
        if ones:
            modes.append(ones[0])
            continue
        zeros = [s for s in range(S) if fixings.get((s, t)) == 0]
        if len(zeros) == S - 1:
            modes.append(next(s for s in range(S) if s not in zeros))
            continue
        return None
    return ModeAssignment(tuple(modes))


def bnb_solve(channels: ChannelSet, refined: RefinedModeSet | None,
              cfg: ScenarioConfig) -> BnBResult:
    """Algorithm: best-first search keyed by (lower bound, insertion order);
    branch on the most fractional entry into b=0 / b=1 children (the latter
    zeroing the tile's other modes); prune nodes at or above the incumbent;
    terminate when (U - L)/L <= eps_bnb or the tree is exhausted."""
    ch = channels.subset(refined.mode_indices) if refined is not None else channels
    S, T = ch.num_modes, ch.num_tiles
    model = LiftedModel(ch, cfg)
    warnings: list[str] = []
    infeasible_assignments: list[tuple] = []
    fixed_cache: dict[tuple, BeamformingSolution] = {}
    counters = {"fixed": 0, "nodes": 0}

    def fixed_solve(assignment: ModeAssignment) -> BeamformingSolution:
        key = assignment.mode_per_tile
        if key not in fixed_cache:
            counters["fixed"] += 1
            fixed_cache[key] = solve_fixed_assignment(ch, assignment, cfg)
        return fixed_cache[key]

    incumbent: BeamformingSolution | None = None
    upper = np.inf

    def offer_incumbent(assignment: ModeAssignment) -> float:
        nonlocal incumbent, upper
        try:
            sol = fixed_solve(assignment)
        except ConicSolverError as exc:
            warnings.append(f"fixed solve failed at {assignment.mode_per_tile}: {exc}")
            return np.inf
        if not sol.feasible:
            if assignment.mode_per_tile not in infeasible_assignments:
                infeasible_assignments.append(assignment.mode_per_tile)
            return np.inf
        if sol.objective_mw < upper:
            upper = sol.objective_mw
            incumbent = sol
        return sol.objective_mw

    trace: list[TraceRow] = []

    def emit(iteration: int, lower: float, open_nodes: int):
        trace.append(TraceRow(iteration, lower, upper, open_nodes))

    root = model.solve({})
    if root.status == INFEASIBLE:
        return BnBResult(INFEASIBLE, None, None, None, np.inf, [], 1, 0,
                         warnings, infeasible_assignments)
    rounded = round_relaxed(root.b_tilde)
    offer_incumbent(rounded)
    root_lb = root.lower_bound_mw
    lower_pub = root_lb
    queue: list = []
    order = itertools.count()
    heapq.heappush(queue, (root_lb, next(order),
                           BnBNode({}, root_lb, root, rounded, upper, 0)))
    iteration = 1
    emit(iteration, min(lower_pub, upper), len(queue))

    def gap_of(lower: float) -> float:
        if not np.isfinite(upper):
            return np.inf
        if lower <= 0:
            return np.inf
        return (upper - lower) / lower

    while queue:
        counters["nodes"] += 1
        if counters["nodes"] > cfg.max_bnb_nodes:
            warnings.append("node budget exhausted before convergence")
            break
        if gap_of(lower_pub) <= cfg.eps_bnb:
            break
        lb, _, node = heapq.heappop(queue)
        if lb >= upper:
            continue
        branch = select_branch(node.relaxed.b_tilde, node.rounded, node.fixings)
        if branch is None:
            # integral relaxation: the node's own rounding equals its bound
            continue
        s_star, t_star = branch
        for value in (0, 1):
            child_fix = dict(node.fixings)
            child_fix[(s_star, t_star)] = value
            if value == 1:
                for s in range(S):
                    if s != s_star:
                        child_fix[(s, t_star)] = 0
            assignment = _determined_assignment(child_fix, S, T)
            if assignment is not None:
                offer_incumbent(assignment)  # leaf: the exact solve is both bounds
                continue
            try:
                relaxed = model.solve(child_fix)
            except ConicSolverError as exc:
                warnings.append(f"node relaxation failed at {child_fix}: {exc}")
                continue  # pruned-with-warning
            if relaxed.status == INFEASIBLE:
                continue
            child_lb = max(relaxed.lower_bound_mw, node.lower_bound)
            child_rounded = round_relaxed(relaxed.b_tilde)
            child_upper = offer_incumbent(child_rounded)
            if child_lb < upper:
                heapq.heappush(queue, (child_lb, next(order),
                                       BnBNode(child_fix, child_lb, relaxed,
                                               child_rounded, child_upper,
                                               node.depth + 1)))
        iteration += 1
        queue_lower = queue[0][0] if queue else upper
        lower_pub = max(lower_pub, min(queue_lower, upper))
        emit(iteration, min(lower_pub, upper), len(queue))

    if incumbent is None:
        return BnBResult(INFEASIBLE, None, None, None, np.inf, trace,
                         counters["nodes"], counters["fixed"], warnings,
                         infeasible_assignments)
    if not queue or gap_of(lower_pub) <= 0:
        lower_pub = upper
    iteration += 1
    emit(iteration, min(lower_pub, upper), len(queue))
    return BnBResult(OPTIMAL, incumbent.assignment, incumbent,
                     incumbent.objective_mw, max(gap_of(lower_pub), 0.0),
                     trace, counters["nodes"], counters["fixed"], warnings,
                     infeasible_assignments)


def trace_to_csv(trace: list, path) -> None:
    """Per-iteration convergence record (lower/upper bound, open node count)."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "lowerBoundMw", "upperBoundMw", "openNodes"])
        for row in trace:
            ub = "INF" if not np.isfinite(row.upper_mw) else f"{row.upper_mw:.9g}"
            lb = f"{row.lower_mw:.9g}" if np.isfinite(row.lower_mw) else "INF"
            writer.writerow([row.iteration, lb, ub, row.open_nodes])
