import functools

import pytest

from tilebeam.channels import synth_channels
from tilebeam.codebook import build_codebook
from tilebeam.config import ScenarioConfig
from tilebeam.preselect import calibrate_threshold
from tilebeam.scenario import sample_scenario

# populated by the acceptance tie-in so the per-criterion pass/fail lines
# survive output capture and land in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

# small configuration used across the solver test modules: one receiver of
# each kind keeps every conic solve in the millisecond range
SMALL_CFG = ScenarioConfig(num_irs=1, num_ers=1, num_antennas=4, num_tiles=2,
                           target_mode_set_size=3, max_power_dbm=90.0,
                           eps_bnb=1e-4, eps_sca=1e-4)


@functools.lru_cache(maxsize=64)
def channels_for(cfg: ScenarioConfig, seed: int, refined_size: int | None = None):
    inst = sample_scenario(cfg, seed=seed)
    codebook = build_codebook(cfg.reflection_grid_size, cfg.wavefront_offsets)
    offline = synth_channels(inst, codebook)
    if refined_size is None:
        return offline
    refined = calibrate_threshold(offline, cfg.preselect_criterion,
                                  refined_size, cfg.omega)
    return offline.subset(refined.mode_indices)


@pytest.fixture(scope="session")
def small_cfg():
    return SMALL_CFG
