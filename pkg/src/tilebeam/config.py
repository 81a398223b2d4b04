"""System configuration: all scenario, QoS, codebook, and solver parameters.

Configs load from a JSON file whose keys match the field names below
(camelCase aliases from the documented schema are accepted); CLI flags
override file values.  dB/dBm appear only here at the I/O boundary --
internally linear powers are milliwatts and EH quantities microwatts.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .eh import EHParams


class ConfigError(ValueError):
    pass


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def lin_to_db(lin: float) -> float:
    return 10.0 * math.log10(lin)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True)
class ScenarioConfig:
    # system dimensions
    num_antennas: int = 4
    num_irs: int = 2           # information receivers K
    num_ers: int = 2           # energy harvesting receivers J
    num_elements: int = 600    # IRS cells M
    num_tiles: int = 2         # T (must divide M)
    target_mode_set_size: int = 4  # refined set size S

    # QoS targets (scalar broadcasts to every receiver, or one value each)
    min_sinr_db: tuple = (10.0,)
    min_harvest_uw: tuple = (10.0,)
    eh_params: tuple = (EHParams(20.0, 6400.0, 0.003),)

    # powers and noise
    noise_ir_dbm: float = -100.0
    noise_er_dbm: float = -100.0
    max_power_dbm: float = 40.0

    # propagation
    carrier_hz: float = 2.4e9
    path_loss_exponent: float = 2.0
    ref_path_loss_db: float = 40.0     # at 1 m
    shadow_direct_db: float = -30.0
    shadow_reflected_db: float = 0.0
    scatterers_per_link: int = 6
    use_polarization: bool = True

    # geometry (meters)
    sector_radius_m: float = 10.0
    irs_distance_m: float = 10.0
    charging_radius_m: float = 2.0
    min_user_distance_m: float = 1.0
    min_er_distance_m: float = 0.2

    # offline codebook / tiles
    reflection_grid_size: int = 121
    wavefront_offsets: tuple = (0.0, math.pi)
    element_spacing_wl: float = 0.5
    unit_cell_amplitude: float = 1.0

    # pre-selection
    preselect_criterion: int = 1
    omega: float = 1.0

    # algorithm parameters
    penalty_factor: float = 1e3
    eps_bnb: float = 1e-2
    eps_sca: float = 1e-2
    rank_tol: float = 1e-6
    solver_tol: float = 1e-8
    feas_tol: float = 1e-6
    cancel_energy_interference: bool = False
    eh_linear_efficiency: float | None = None  # default derived from the EH curve
    enum_cap: int = 4096
    max_sca_iterations: int = 100
    max_bnb_nodes: int = 200000

    seed: int = 0

    def __post_init__(self):
        if self.num_irs < 1:
            raise ConfigError("at least one information receiver is required")
        if self.num_ers < 0:
            raise ConfigError("number of energy receivers must be nonnegative")
        if self.num_antennas < 1 or self.num_elements < 1 or self.num_tiles < 1:
            raise ConfigError("system dimensions must be positive")
        if self.num_elements % self.num_tiles != 0:
            raise ConfigError(
                f"{self.num_elements} elements do not divide into {self.num_tiles} tiles")
        n_off = self.reflection_grid_size * len(self.wavefront_offsets)
        if not (1 <= self.target_mode_set_size <= n_off):
            raise ConfigError(
                f"refined set size {self.target_mode_set_size} outside [1, {n_off}]")
        object.__setattr__(self, "min_sinr_db",
                           _broadcast(self.min_sinr_db, self.num_irs, "minSINR"))
        object.__setattr__(self, "min_harvest_uw",
                           _broadcast(self.min_harvest_uw, self.num_ers, "minHarvest"))
        eh = self.eh_params
        if isinstance(eh, EHParams):
            eh = (eh,)
        eh = tuple(eh)
        if self.num_ers > 0:
            if len(eh) == 1:
                eh = eh * self.num_ers
            if len(eh) != self.num_ers:
                raise ConfigError("one EHParams per energy receiver required")
        object.__setattr__(self, "eh_params", eh)
        for g in self.min_sinr_db:
            if db_to_lin(g) <= 0:
                raise ConfigError("SINR targets must be positive in linear scale")
        for e in self.min_harvest_uw:
            if e < 0:
                raise ConfigError("harvest targets must be nonnegative")
        for name in ("eps_bnb", "eps_sca"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.penalty_factor <= 0:
            raise ConfigError("penalty factor must be positive")
        for name in ("sector_radius_m", "irs_distance_m", "charging_radius_m",
                     "min_user_distance_m", "min_er_distance_m"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.charging_radius_m <= self.min_er_distance_m:
            raise ConfigError("charging radius must exceed the minimum ER distance")
        if self.min_user_distance_m >= self.sector_radius_m:
            raise ConfigError("minimum user distance must be below the sector radius")
        if not all(map(math.isfinite, (self.max_power_dbm, self.noise_ir_dbm,
                                       self.noise_er_dbm))):
            raise ConfigError("powers must be finite")

    # linear-unit views -----------------------------------------------------
    @property
    def sinr_targets(self) -> tuple:
        return tuple(db_to_lin(g) for g in self.min_sinr_db)

    @property
    def noise_ir_mw(self) -> float:
        return dbm_to_mw(self.noise_ir_dbm)

    @property
    def noise_er_mw(self) -> float:
        return dbm_to_mw(self.noise_er_dbm)

    @property
    def max_power_mw(self) -> float:
        return dbm_to_mw(self.max_power_dbm)

    @property
    def wavelength_m(self) -> float:
        return 299792458.0 / self.carrier_hz

    @property
    def num_offline_modes(self) -> int:
        return self.reflection_grid_size * len(self.wavefront_offsets)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


def _broadcast(value, n, name) -> tuple:
    if isinstance(value, (int, float)):
        value = (float(value),)
    value = tuple(float(v) for v in value)
    if n == 0:
        return ()
    if len(value) == 1:
        return value * n
    if len(value) != n:
        raise ConfigError(f"{name} needs 1 or {n} values, got {len(value)}")
    return value


# JSON schema: field names as above; camelCase aliases from the documented
# config file format.
_ALIASES = {
    "numAntennas": "num_antennas", "numIRs": "num_irs", "numERs": "num_ers",
    "numElements": "num_elements", "numTiles": "num_tiles",
    "targetModeSetSize": "target_mode_set_size",
    "minSINR": "min_sinr_db", "minSinrDb": "min_sinr_db",
    "minHarvest": "min_harvest_uw", "minHarvestMicrowatt": "min_harvest_uw",
    "noisePowerIR": "noise_ir_dbm", "noisePowerER": "noise_er_dbm",
    "maxPower": "max_power_dbm", "maxPowerDbm": "max_power_dbm",
    "carrierFrequency": "carrier_hz", "pathLossExponent": "path_loss_exponent",
    "refPathLoss": "ref_path_loss_db", "shadowDirect": "shadow_direct_db",
    "shadowReflected": "shadow_reflected_db",
    "scatterersPerLink": "scatterers_per_link", "ehParams": "eh_params",
    "penaltyFactor": "penalty_factor", "epsBnB": "eps_bnb", "epsSCA": "eps_sca",
    "rankTol": "rank_tol", "solverTol": "solver_tol", "feasTol": "feas_tol",
    "cancelEnergyInterference": "cancel_energy_interference",
    "chargingRadius": "charging_radius_m", "sectorRadius": "sector_radius_m",
    "irsDistance": "irs_distance_m", "reflectionGridSize": "reflection_grid_size",
    "wavefrontOffsets": "wavefront_offsets", "elementSpacing": "element_spacing_wl",
    "usePolarization": "use_polarization",
    "preselectCriterion": "preselect_criterion",
    "ehLinearEfficiency": "eh_linear_efficiency", "enumCap": "enum_cap",
    "maxScaIterations": "max_sca_iterations", "maxBnbNodes": "max_bnb_nodes",
}

_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}


def config_from_dict(raw: dict) -> ScenarioConfig:
    kw = {}
    for key, value in raw.items():
        name = _ALIASES.get(key, key)
        if name not in _FIELD_NAMES:
            raise ConfigError(f"unknown configuration field: {key}")
        if name == "eh_params":
            value = _parse_eh(value)
        if name in ("min_sinr_db", "min_harvest_uw", "wavefront_offsets") \
                and isinstance(value, list):
            value = tuple(value)
        kw[name] = value
    return ScenarioConfig(**kw)


def _parse_eh(value):
    def one(v):
        if isinstance(v, EHParams):
            return v
        if isinstance(v, dict):
            return EHParams(float(v["a"]), float(v["c"]),
                            float(v.get("rho", v.get("varrho", 0.003))))
        return EHParams(float(v[0]), float(v[1]), float(v[2]))
    if isinstance(value, (list, tuple)) and value and \
            isinstance(value[0], (list, tuple, dict, EHParams)):
        return tuple(one(v) for v in value)
    return (one(value),)


def load_config(path=None, overrides: dict | None = None) -> ScenarioConfig:
    """Read a JSON config file and apply overrides (CLI flags) on top."""
    raw = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    if overrides:
        raw.update(overrides)
    return config_from_dict(raw)
