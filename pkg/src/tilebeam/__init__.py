"""tilebeam: joint transmit beamforming and IRS tile transmission-mode
selection for SWIPT transmit-power minimization, with an exact
branch-and-bound solver, a penalty-based convex-approximation solver,
baseline schemes, and a Monte Carlo benchmark CLI."""

from .config import ScenarioConfig, load_config, config_from_dict
from .eh import EHParams, harvested_power, required_rf_power
from .scenario import sample_scenario, ScenarioInstance
from .codebook import TransmissionMode, build_codebook, array_response, tile_response
from .channels import ChannelSet, synth_channels, export_channels, import_channels
from .preselect import RefinedModeSet, refine_modes, calibrate_threshold
from .sdp import (ModeAssignment, BeamformingSolution, RelaxedSolution,
                  effective_channel, sinr, received_rf_power,
                  solve_fixed_assignment, assemble_relaxed_sdp,
                  extract_beamformers, verify_solution, LiftedModel)
from .conic import ConicProblem, ConicSolution, solve_conic, realify
from .bnb import bnb_solve, round_relaxed, select_branch
from .sca import sca_solve, sca_subproblem
from .schemes import (enumerate_optimal, baseline_random_mode,
                      baseline_random_phase, baseline_mrt, linear_eh_scheme,
                      no_irs_scheme)
from .bench import run_sweep, emit_records, parse_records, ExperimentRecord

__version__ = "0.1.0"
