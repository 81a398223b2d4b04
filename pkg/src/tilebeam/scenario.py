"""Random scenario sampling: receiver placement, scatterer angles, and
per-link channel coefficients, deterministic in (config, seed).

Geometry is planar: the base station sits at the origin, the reflecting
surface center on the +x axis at ``irs_distance_m``.  Information receivers
are drawn uniformly over the half-disc of ``sector_radius_m`` facing the
surface; energy receivers over the half-disc of ``charging_radius_m``
centered at the surface and facing the base station.  Heights are folded
into path lengths.

The draw order depends only on (K, J, L), never on antenna or surface
dimensions, so sweeps over those parameters see identical propagation
geometry per seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .codebook import array_response
from .config import ScenarioConfig


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class LinkAngles:
    """Per-scatterer angles of one link (radians) and derived quantities."""

    azimuth: np.ndarray
    elevation: np.ndarray

    @property
    def direction_cosine(self) -> np.ndarray:
        """Cosine along the transmit array axis, u = sin(el) * cos(az)."""
        return np.sin(self.elevation) * np.cos(self.azimuth)

    @property
    def uv(self) -> np.ndarray:
        """(L, 2) tile-plane direction cosines (u, v)."""
        return np.stack([np.sin(self.elevation) * np.cos(self.azimuth),
                         np.sin(self.elevation) * np.sin(self.azimuth)], axis=1)


@dataclass(frozen=True)
class ScenarioInstance:
    """One sampled propagation scenario.

    Reflected links factor as 1^H C_R R C_T D_T per tile/mode; direct links
    as 1^H C_D D_D.  C_* are per-scatterer complex coefficients (diagonals),
    D_* transmit array response matrices (L x N_T).
    """

    bs_position: np.ndarray
    irs_position: np.ndarray
    ir_positions: np.ndarray          # (K, 2)
    er_positions: np.ndarray          # (J, 2)

    bs_irs_departure: LinkAngles      # at the BS, toward the surface
    bs_irs_arrival: LinkAngles        # at the surface (incident)
    c_t: np.ndarray                   # (L,) BS-surface coefficients

    ir_reflect_departure: tuple       # per IR: LinkAngles at the surface
    ir_c_r: tuple                     # per IR: (L,) surface-receiver coefficients
    ir_direct_departure: tuple        # per IR: LinkAngles at the BS
    ir_c_d: tuple                     # per IR: (L,) direct coefficients

    er_reflect_departure: tuple
    er_c_r: tuple
    er_direct_departure: tuple
    er_c_d: tuple

    num_antennas: int
    num_elements: int
    num_tiles: int
    element_spacing_wl: float
    unit_cell_amplitude: float
    antenna_spacing_wl: float = 0.5

    @property
    def d_t(self) -> np.ndarray:
        """BS array response matrix of the BS-surface link, (L, N_T)."""
        return _response_matrix(self.bs_irs_departure, self.num_antennas,
                                self.antenna_spacing_wl)

    def d_direct(self, kind: str, i: int) -> np.ndarray:
        ang = (self.ir_direct_departure if kind == "ir" else self.er_direct_departure)[i]
        return _response_matrix(ang, self.num_antennas, self.antenna_spacing_wl)


def _response_matrix(angles: LinkAngles, num_antennas: int, spacing: float) -> np.ndarray:
    return np.stack([array_response(num_antennas, spacing, u)
                     for u in angles.direction_cosine])


def _path_loss_amplitude(distance_m: float, cfg: ScenarioConfig) -> float:
    loss_db = cfg.ref_path_loss_db + 10.0 * cfg.path_loss_exponent * math.log10(distance_m)
    return 10.0 ** (-loss_db / 20.0)


def _rayleigh(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-mean-square complex Gaussian fading, E|g|^2 = 1, uniform phase."""
    z = rng.normal(size=(n, 2))
    return (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)


def _angles(rng: np.random.Generator, n: int, elevation_high: float) -> LinkAngles:
    az = rng.uniform(0.0, 2.0 * math.pi, size=n)
    el = rng.uniform(0.0, elevation_high, size=n)
    return LinkAngles(az, el)


def sample_scenario(cfg: ScenarioConfig, seed: int | None = None) -> ScenarioInstance:
    """Draw one scenario.  Identical (cfg, seed) pairs give identical
    instances field by field."""
    if seed is None:
        seed = cfg.seed
    rng = np.random.default_rng(seed)
    L = cfg.scatterers_per_link
    bs = np.zeros(2)
    irs = np.array([cfg.irs_distance_m, 0.0])

    # receiver placement (area-uniform over the half-discs)
    ir_pos = np.empty((cfg.num_irs, 2))
    for k in range(cfg.num_irs):
        r = math.sqrt(rng.uniform(cfg.min_user_distance_m ** 2,
                                  cfg.sector_radius_m ** 2))
        phi = rng.uniform(-math.pi / 2.0, math.pi / 2.0)
        ir_pos[k] = (r * math.cos(phi), r * math.sin(phi))
    er_pos = np.empty((cfg.num_ers, 2))
    for j in range(cfg.num_ers):
        r = math.sqrt(rng.uniform(cfg.min_er_distance_m ** 2,
                                  cfg.charging_radius_m ** 2))
        phi = rng.uniform(math.pi / 2.0, 3.0 * math.pi / 2.0)  # faces the BS
        er_pos[j] = irs + (r * math.cos(phi), r * math.sin(phi))

    shadow_refl = 10.0 ** (cfg.shadow_reflected_db / 20.0)
    shadow_dir = 10.0 ** (cfg.shadow_direct_db / 20.0)

    # BS-surface link: polarization mismatch of the incident wave folds into
    # the coefficient magnitudes as max(cos, 0.1); disabled by flag.
    dep = _angles(rng, L, math.pi / 4.0)
    arr = _angles(rng, L, math.pi / 4.0)
    pol = rng.uniform(0.0, 2.0 * math.pi, size=L)
    fading = _rayleigh(rng, L)
    pol_factor = np.maximum(np.cos(pol), 0.1) if cfg.use_polarization else np.ones(L)
    amp_t = _path_loss_amplitude(cfg.irs_distance_m, cfg) * shadow_refl
    c_t = amp_t * pol_factor * fading

    def receiver_links(pos):
        d_irs = float(np.linalg.norm(pos - irs))
        d_bs = float(np.linalg.norm(pos - bs))
        if d_irs <= 0 or d_bs <= 0:
            raise GeometryError("receiver coincides with an endpoint")
        refl_dep = _angles(rng, L, math.pi)                  # user-link elevations
        c_r = _path_loss_amplitude(d_irs, cfg) * shadow_refl * _rayleigh(rng, L)
        dir_dep = _angles(rng, L, math.pi)
        c_d = _path_loss_amplitude(d_bs, cfg) * shadow_dir * _rayleigh(rng, L)
        return refl_dep, c_r, dir_dep, c_d

    ir_links = [receiver_links(p) for p in ir_pos]
    er_links = [receiver_links(p) for p in er_pos]

    return ScenarioInstance(
        bs_position=bs, irs_position=irs, ir_positions=ir_pos, er_positions=er_pos,
        bs_irs_departure=dep, bs_irs_arrival=arr, c_t=c_t,
        ir_reflect_departure=tuple(x[0] for x in ir_links),
        ir_c_r=tuple(x[1] for x in ir_links),
        ir_direct_departure=tuple(x[2] for x in ir_links),
        ir_c_d=tuple(x[3] for x in ir_links),
        er_reflect_departure=tuple(x[0] for x in er_links),
        er_c_r=tuple(x[1] for x in er_links),
        er_direct_departure=tuple(x[2] for x in er_links),
        er_c_d=tuple(x[3] for x in er_links),
        num_antennas=cfg.num_antennas, num_elements=cfg.num_elements,
        num_tiles=cfg.num_tiles, element_spacing_wl=cfg.element_spacing_wl,
        unit_cell_amplitude=cfg.unit_cell_amplitude,
    )
