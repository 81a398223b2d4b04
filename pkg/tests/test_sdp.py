import numpy as np
import pytest

from conftest import SMALL_CFG, channels_for
from tilebeam.channels import ChannelSet
from tilebeam.eh import UnattainableDemandError, required_rf_power
from tilebeam.sdp import (InconsistentFixingsError, LiftedModel, ModeAssignment,
                          BeamformingSolution, RankOneViolationError,
                          assemble_relaxed_sdp, effective_channel,
                          extract_beamformers, received_rf_power, sinr,
                          solve_fixed_assignment, verify_solution)


def toy_channels(h_ir_vecs, h_er_vecs, num_tiles):
    """ChannelSet from explicit per-(mode,tile) vectors, shape (S,T+1,N)."""
    h_ir = np.array(h_ir_vecs)[None, ...]
    h_er = (np.array(h_er_vecs)[None, ...] if h_er_vecs is not None
            else np.zeros((0,) + h_ir.shape[1:]))
    return ChannelSet(h_ir, h_er, tuple(range(h_ir.shape[1])))


def test_effective_channel_empty_and_sum():
    ch = channels_for(SMALL_CFG, 0, 3)
    direct_only = ChannelSet(ch.h_ir[:, :1, :1, :], ch.h_er[:, :1, :1, :], (0,))
    g0 = effective_channel(direct_only, ModeAssignment(()), "ir", 0)
    assert np.allclose(g0, ch.h_ir[0, 0, 0])
    a = ModeAssignment((1, 2))
    g = effective_channel(ch, a, "ir", 0)
    assert np.allclose(g, ch.h_ir[0, 0, 0] + ch.h_ir[0, 1, 1] + ch.h_ir[0, 2, 2])


def test_effective_channel_matches_one_hot_double_sum():
    ch = channels_for(SMALL_CFG, 1, 3)
    rng = np.random.default_rng(0)
    S, T = ch.num_modes, ch.num_tiles
    for _ in range(100):
        combo = tuple(rng.integers(S) for _ in range(T))
        b = np.zeros((S, T + 1))
        b[0, 0] = 1.0
        for t, s in enumerate(combo):
            b[s, t + 1] = 1.0
        for kind, i in ch.receivers():
            expected = np.einsum("st,stn->n", b, ch.vectors(kind, i))
            got = effective_channel(ch, ModeAssignment(combo), kind, i)
            assert np.allclose(got, expected)


def unit_solution(p, q, n=2):
    sol = BeamformingSolution("Optimal")
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0
    sol.W = [p * np.outer(e1, e1.conj())]
    sol.V = q * np.outer(e1, e1.conj())
    return sol


def test_sinr_single_user_and_energy_interference():
    e1 = np.zeros((1, 1, 2), dtype=complex)
    e1[0, 0, 0] = 1.0
    ch = ChannelSet(e1[None, ...], np.zeros((0, 1, 1, 2), dtype=complex), (0,))
    a = ModeAssignment(())
    cfg = SMALL_CFG.replace(num_ers=0, min_harvest_uw=(), eh_params=())
    sigma2 = cfg.noise_ir_mw
    sol = unit_solution(3.0, 0.0)
    assert sinr(ch, a, sol, 0, cfg) == pytest.approx(3.0 / sigma2, rel=1e-12)
    sol = unit_solution(3.0, 2.0)
    assert sinr(ch, a, sol, 0, cfg) == pytest.approx(3.0 / (2.0 + sigma2), rel=1e-12)
    cancel = cfg.replace(cancel_energy_interference=True)
    assert sinr(ch, a, sol, 0, cancel) == pytest.approx(3.0 / sigma2, rel=1e-12)


def test_received_rf_power_projection_and_isotropic():
    rng = np.random.default_rng(3)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    h_er = np.zeros((1, 1, 1, 4), dtype=complex)
    h_er[0, 0, 0] = h
    ch = ChannelSet(np.zeros((1, 1, 1, 4), dtype=complex) + 1e-9, h_er, (0,))
    a = ModeAssignment(())
    sol = BeamformingSolution("Optimal")
    p = 2.5
    sol.W = [p * np.outer(h, h.conj()) / np.linalg.norm(h) ** 2]
    sol.V = np.zeros((4, 4), dtype=complex)
    got = received_rf_power(ch, a, sol, 0)
    assert got == pytest.approx(p * np.linalg.norm(h) ** 2 * 1e3, rel=1e-12)
    sol.W = [np.zeros((4, 4), dtype=complex)]
    sol.V = 0.7 * np.eye(4)
    assert received_rf_power(ch, a, sol, 0) == pytest.approx(
        0.7 * np.linalg.norm(h) ** 2 * 1e3, rel=1e-12)


def test_received_power_matches_lifted_expansion():
    # quadratic form of the effective channel equals the beta-weighted
    # double sum over tuple pairs with a one-hot selection
    ch = channels_for(SMALL_CFG, 2, 3)
    rng = np.random.default_rng(1)
    S, T, n = ch.num_modes, ch.num_tiles, ch.num_antennas
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    x = x @ x.conj().T
    for _ in range(20):
        combo = tuple(rng.integers(S) for _ in range(T))
        tuples = [(0, 0)] + [(combo[t], t + 1) for t in range(T)]
        v = ch.vectors("er", 0)
        direct = 0.0
        for (s1, t1) in tuples:
            for (s2, t2) in tuples:
                direct += np.vdot(v[s1, t1], x @ v[s2, t2])
        g = effective_channel(ch, ModeAssignment(combo), "er", 0)
        assert direct.imag == pytest.approx(0.0, abs=1e-10)
        assert direct.real == pytest.approx(np.real(g.conj() @ x @ g), rel=1e-9)


def test_single_user_analytic():
    cfg = SMALL_CFG.replace(num_ers=0, min_harvest_uw=(), eh_params=())
    ch = channels_for(cfg, 0, 3)
    a = ModeAssignment((0, 1))
    sol = solve_fixed_assignment(ch, a, cfg)
    g = effective_channel(ch, a, "ir", 0)
    expected = cfg.sinr_targets[0] * cfg.noise_ir_mw / np.linalg.norm(g) ** 2
    assert sol.objective_mw == pytest.approx(expected, rel=1e-6)
    assert np.trace(sol.V).real <= 1e-8 * sol.objective_mw + 1e-12
    assert sol.rank_ratios[0] <= 1e-6


def test_energy_only_analytic():
    # vanishing SINR target: power goes entirely to the harvest constraint
    cfg = SMALL_CFG.replace(min_sinr_db=(-60.0,))
    ch = channels_for(cfg, 0, 3)
    a = ModeAssignment((0, 1))
    sol = solve_fixed_assignment(ch, a, cfg)
    g_e = effective_channel(ch, a, "er", 0)
    preq = required_rf_power(cfg.min_harvest_uw[0], cfg.eh_params[0]) * 1e-3
    expected = preq / np.linalg.norm(g_e) ** 2
    assert sol.objective_mw == pytest.approx(expected, rel=1e-6)


def test_unattainable_demand_propagates():
    cfg = SMALL_CFG.replace(min_harvest_uw=(25.0,))
    ch = channels_for(SMALL_CFG, 0, 3)
    with pytest.raises(UnattainableDemandError):
        solve_fixed_assignment(ch, ModeAssignment((0, 0)), cfg)


def test_variable_census():
    # independent counter over the assembled blocks and scalar maps
    cfg = SMALL_CFG.replace(num_irs=2, num_ers=1)
    ch = channels_for(cfg, 0, 3)
    prob = assemble_relaxed_sdp(ch, None, {}, cfg)
    K, S, T = 2, 3, 2
    n_tuples = S * (T + 1)
    n_pairs = n_tuples * (n_tuples + 1) // 2
    assert n_tuples == 9 and n_pairs == 45
    psd_blocks = [b for b in prob.blocks if b.kind == "psd"]
    assert len(psd_blocks) == 3 + (K + 1) * n_pairs == 138
    assert len(prob.meta["b_vars"]) == S * T == 6
    assert len(prob.meta["beta_vars"]) == n_pairs == 45


def test_fully_fixed_relaxation_equals_fixed_solve(small_cfg):
    ch = channels_for(small_cfg, 3, 3)
    a = ModeAssignment((2, 1))
    fixed = solve_fixed_assignment(ch, a, small_cfg)
    model = LiftedModel(ch, small_cfg)
    fixings = {(s, t): (1 if s == a.mode_per_tile[t - 1] else 0)
               for s in range(3) for t in (1, 2)}
    relaxed = model.solve(fixings)
    assert relaxed.objective_mw == pytest.approx(fixed.objective_mw, rel=1e-5)
    # lifted-vs-direct identity at a binary point
    assert relaxed.lifted_objective_mw == pytest.approx(
        relaxed.objective_mw, rel=1e-8)


def test_relaxation_lower_bounds_enumeration(small_cfg):
    import itertools
    ch = channels_for(small_cfg, 5, 3)
    best = min(solve_fixed_assignment(ch, ModeAssignment(a), small_cfg).objective_mw
               for a in itertools.product(range(3), repeat=2))
    root = LiftedModel(ch, small_cfg).solve({})
    assert root.objective_mw <= best * (1 + 1e-9)
    assert root.lower_bound_mw <= best * (1 + 1e-9)
    # relaxed solution respects the relaxed constraint families
    b = root.b_tilde
    assert np.all(b >= -1e-9) and np.all(b <= 1 + 1e-9)
    assert np.allclose(b.sum(axis=0), 1.0, atol=1e-7)
    for (ta, tb), val in root.beta_tilde.items():
        assert -1e-7 <= val <= 1 + 1e-7


def test_symmetric_pairing_is_real():
    # the unordered-pair coefficient matrices are Hermitian, so every
    # quadratic-form row is exactly real; the ordered double sum agrees
    ch = channels_for(SMALL_CFG, 4, 3)
    model = LiftedModel(ch, SMALL_CFG)
    rng = np.random.default_rng(0)
    h = model.h[("ir", 0)]
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = x @ x.conj().T
    b = rng.uniform(size=len(model.tuples))
    ordered = 0.0 + 0.0j
    for i, hi in enumerate(h):
        for j, hj in enumerate(h):
            ordered += b[i] * b[j] * np.vdot(hi, x @ hj)
    assert abs(ordered.imag) < 1e-10
    from tilebeam.conic import herm_to_vec
    paired = 0.0
    for pi, (ia, ib) in enumerate(model.pairs):
        # off-diagonal coefficient matrices already hold both orderings
        beta = b[ia] * b[ib]
        a_vec = model.avec[("ir", 0)][pi]
        paired += beta * float(a_vec @ herm_to_vec(x))
    assert paired == pytest.approx(ordered.real, rel=1e-9)


def test_extract_beamformers_contract():
    rng = np.random.default_rng(7)
    w = rng.normal(size=3) + 1j * rng.normal(size=3)
    W = np.outer(w, w.conj())
    vec, ratio = extract_beamformers(W, 1e-6)
    assert ratio <= 1e-12
    phase = vec[0] / w[0]
    assert np.allclose(vec, phase * w, atol=1e-9)
    assert abs(abs(phase) - 1.0) < 1e-9
    with pytest.raises(RankOneViolationError) as err:
        extract_beamformers(np.eye(2, dtype=complex), 1e-6)
    assert err.value.ratio == pytest.approx(1.0)


def test_fixed_solve_rank_one_over_seeds(small_cfg):
    worst = 0.0
    for seed in range(50):
        ch = channels_for(small_cfg, seed, 3)
        sol = solve_fixed_assignment(ch, ModeAssignment((0, 1)), small_cfg)
        if sol.feasible:
            worst = max(worst, max(sol.rank_ratios))
    assert worst <= 1e-6


def test_verify_solution_report(small_cfg):
    ch = channels_for(small_cfg, 6, 3)
    a = ModeAssignment((1, 0))
    sol = solve_fixed_assignment(ch, a, small_cfg)
    report = verify_solution(ch, a, sol, small_cfg)
    assert report.passed
    # halving the covariances must break the tight quality rows
    cheat = BeamformingSolution("Optimal", assignment=a)
    cheat.W = [0.5 * w for w in sol.W]
    cheat.V = 0.5 * sol.V
    report2 = verify_solution(ch, a, cheat, small_cfg)
    assert not report2.passed
    assert min(report2.slack("sinr[0]"), report2.slack("harvest[0]")) < -1e-3
    # harvest slack is consistent with the closed-form inversion
    rf = received_rf_power(ch, a, sol, 0)
    preq = required_rf_power(small_cfg.min_harvest_uw[0], small_cfg.eh_params[0])
    assert (report.slack("harvest[0]") >= -1e-9) == (rf >= preq * (1 - 1e-9))


def test_inconsistent_fixings_raise(small_cfg):
    ch = channels_for(small_cfg, 0, 3)
    model = LiftedModel(ch, small_cfg)
    with pytest.raises(InconsistentFixingsError):
        model.assemble({(0, 1): 1, (1, 1): 1})
    with pytest.raises(InconsistentFixingsError):
        model.assemble({(s, 1): 0 for s in range(3)})
    with pytest.raises(InconsistentFixingsError):
        model.assemble({(0, 9): 1})
