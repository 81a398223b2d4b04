"""Transmission-mode codebook and far-field responses of the transmit array
and of one reflecting tile.

A transmission mode is a linear phase gradient over a tile's unit-cell grid
(direction-cosine components in [-1, 1]) combined with a wavefront offset in
{0, pi} that lets different tiles combine constructively or destructively.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TransmissionMode:
    gradient_u: float
    gradient_v: float
    wavefront_offset: float
    index: int


@dataclass(frozen=True)
class TileGeometry:
    """Rectangular grid of unit cells.  ``row_offset`` places the tile inside
    the full surface (cells, along y) so stacked tiles keep distinct phase
    references toward off-grid directions."""

    cells_x: int
    cells_y: int
    spacing_wavelengths: float = 0.5
    row_offset: int = 0

    @property
    def num_cells(self) -> int:
        return self.cells_x * self.cells_y


def array_response(num_antennas: int, spacing_wavelengths: float,
                   direction_cosine: float) -> np.ndarray:
    """Uniform linear array steering vector, entry n = exp(j*2*pi*d*n*cos)."""
    if abs(direction_cosine) > 1.0 + 1e-12:
        raise ValueError(f"direction cosine out of [-1, 1]: {direction_cosine}")
    n = np.arange(num_antennas)
    return np.exp(2j * math.pi * spacing_wavelengths * n * direction_cosine)


def build_codebook(reflection_grid_size: int,
                   offsets=(0.0, math.pi)) -> list[TransmissionMode]:
    """Full offline mode set: a g x g uniform grid over direction-cosine space
    [-1, 1]^2 crossed with the wavefront offsets.  ``reflection_grid_size``
    must be a perfect square (g*g grid points)."""
    g = math.isqrt(reflection_grid_size)
    if g * g != reflection_grid_size:
        raise ValueError(
            f"reflection grid size must be a perfect square, got {reflection_grid_size}"
        )
    grid = np.linspace(-1.0, 1.0, g) if g > 1 else np.array([0.0])
    modes = []
    for off in offsets:
        for gu in grid:
            for gv in grid:
                modes.append(TransmissionMode(float(gu), float(gv), float(off),
                                              len(modes)))
    return modes


def _geometric_sum(alpha: float, count: int) -> complex:
    """sum_{n=0}^{count-1} exp(j*alpha*n), stable at alpha ~ 0 (coherent)."""
    half = 0.5 * alpha
    s = math.sin(half)
    if abs(s) < 1e-12:
        return complex(count, 0.0)
    mag = math.sin(count * half) / s
    return mag * np.exp(1j * half * (count - 1))


def tile_response(tile: TileGeometry, mode: TransmissionMode,
                  in_direction, out_direction, amplitude: float = 1.0) -> complex:
    """Far-field response of one tile for a mode and an (incident, outgoing)
    direction pair given as unit vectors.

    Sums exp{j[phi_mode(q) + k0*d*((u_in+u_out)q_x + (v_in+v_out)q_y) + offset]}
    over the cell grid, with phi_mode(q) = -k0*d*(gU*q_x + gV*q_y).  The sum
    factorizes into two geometric series; magnitude never exceeds
    amplitude * cells_x * cells_y.
    """
    din = np.asarray(in_direction, dtype=float)
    dout = np.asarray(out_direction, dtype=float)
    for d in (din, dout):
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError(f"direction must be a unit vector, got norm {np.linalg.norm(d)}")
    k0d = 2.0 * math.pi * tile.spacing_wavelengths
    alpha_x = k0d * (din[0] + dout[0] - mode.gradient_u)
    alpha_y = k0d * (din[1] + dout[1] - mode.gradient_v)
    sum_x = _geometric_sum(alpha_x, tile.cells_x)
    sum_y = _geometric_sum(alpha_y, tile.cells_y) * np.exp(1j * alpha_y * tile.row_offset)
    return amplitude * sum_x * sum_y * np.exp(1j * mode.wavefront_offset)


def tile_response_grid(tile: TileGeometry, modes: list[TransmissionMode],
                       in_uv: np.ndarray, out_uv: np.ndarray,
                       amplitude: float = 1.0) -> np.ndarray:
    """Vectorized tile responses, shape (len(modes), len(out_uv), len(in_uv)).

    ``in_uv`` / ``out_uv`` are (L, 2) arrays of direction cosines (u, v) of
    the incident and outgoing paths.  Matches :func:`tile_response` entrywise.
    """
    k0d = 2.0 * math.pi * tile.spacing_wavelengths
    gu = np.array([m.gradient_u for m in modes])
    gv = np.array([m.gradient_v for m in modes])
    off = np.array([m.wavefront_offset for m in modes])
    usum = in_uv[None, :, 0] + out_uv[:, None, 0]  # (L_out, L_in)
    vsum = in_uv[None, :, 1] + out_uv[:, None, 1]
    ax = k0d * (usum[None, :, :] - gu[:, None, None])  # (S, L_out, L_in)
    ay = k0d * (vsum[None, :, :] - gv[:, None, None])

    def geo(alpha, count):
        half = 0.5 * alpha
        s = np.sin(half)
        small = np.abs(s) < 1e-12
        safe = np.where(small, 1.0, s)
        mag = np.where(small, float(count), np.sin(count * half) / safe)
        return mag * np.exp(1j * half * (count - 1))

    resp = (geo(ax, tile.cells_x)
            * geo(ay, tile.cells_y) * np.exp(1j * ay * tile.row_offset)
            * np.exp(1j * off)[:, None, None])
    return amplitude * resp


def tile_grid_for(num_elements: int, num_tiles: int,
                  spacing_wavelengths: float = 0.5) -> list[TileGeometry]:
    """Partition ``num_elements`` cells into ``num_tiles`` equal rectangular
    tiles stacked along y, each a near-square cells_x x cells_y grid."""
    if num_elements % num_tiles != 0:
        raise ValueError(f"{num_elements} elements do not split into {num_tiles} tiles")
    per_tile = num_elements // num_tiles
    cx = int(math.isqrt(per_tile))
    while per_tile % cx != 0:
        cx -= 1
    cy = per_tile // cx
    return [TileGeometry(cx, cy, spacing_wavelengths, row_offset=t * cy)
            for t in range(num_tiles)]
