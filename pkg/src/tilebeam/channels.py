"""Effective per-tile, per-mode channel vectors.

A ChannelSet stores h[r][i][s][t] for receiver kind r (IR or ER), receiver
index i, mode s, and tile t, where tile 0 is the virtual tile carrying the
direct link (identical for every mode by construction).
"""

from dataclasses import dataclass

import numpy as np

from .codebook import TransmissionMode, tile_grid_for, tile_response_grid
from .scenario import ScenarioInstance


@dataclass(frozen=True)
class ChannelSet:
    """h_ir: (K, S, T+1, N_T), h_er: (J, S, T+1, N_T); tile 0 = direct link."""

    h_ir: np.ndarray
    h_er: np.ndarray
    mode_indices: tuple   # offline codebook index for each mode slot

    def __post_init__(self):
        if not (np.all(np.isfinite(self.h_ir.view(float)))
                and np.all(np.isfinite(self.h_er.view(float)))):
            raise ValueError("channel entries must be finite")

    @property
    def num_irs(self) -> int:
        return self.h_ir.shape[0]

    @property
    def num_ers(self) -> int:
        return self.h_er.shape[0]

    @property
    def num_modes(self) -> int:
        return self.h_ir.shape[1]

    @property
    def num_tiles(self) -> int:
        return self.h_ir.shape[2] - 1

    @property
    def num_antennas(self) -> int:
        return self.h_ir.shape[3]

    def vectors(self, kind: str, i: int) -> np.ndarray:
        """(S, T+1, N_T) channel tensor of one receiver."""
        return (self.h_ir if kind == "ir" else self.h_er)[i]

    def receivers(self):
        """Iterate (kind, index) over every receiver."""
        for k in range(self.num_irs):
            yield "ir", k
        for j in range(self.num_ers):
            yield "er", j

    def subset(self, mode_slots) -> "ChannelSet":
        """Restrict to a subset of mode slots (e.g. a refined mode set)."""
        slots = list(mode_slots)
        return ChannelSet(self.h_ir[:, slots], self.h_er[:, slots],
                          tuple(self.mode_indices[s] for s in slots))

    def scale_factor(self) -> float:
        """Power-of-ten channel conditioning factor: scaling every vector by
        this brings the median squared norm to O(1)."""
        norms = np.concatenate([
            np.linalg.norm(self.h_ir, axis=3).ravel() ** 2,
            np.linalg.norm(self.h_er, axis=3).ravel() ** 2,
        ])
        norms = norms[norms > 0]
        med = float(np.median(norms)) if norms.size else 1.0
        return 10.0 ** round(-0.5 * np.log10(med))


def synth_channels(instance: ScenarioInstance, codebook: list[TransmissionMode],
                   num_tiles: int | None = None) -> ChannelSet:
    """Build the per-mode, per-tile channels from a sampled scenario.

    Reflected tiles: h^H = 1^H C_R R C_T D_T with R evaluated entrywise from
    the tile response at the stored (arrival, departure) direction pairs.
    Tile 0 columns hold the direct link 1^H C_D D_D for every mode.
    """
    if num_tiles is None:
        num_tiles = instance.num_tiles
    tiles = tile_grid_for(instance.num_elements, num_tiles,
                          instance.element_spacing_wl)
    S = len(codebook)
    n_t = instance.num_antennas
    d_t = instance.d_t                        # (L, N_T)
    in_uv = instance.bs_irs_arrival.uv        # (L, 2)
    ct_dt = instance.c_t[:, None] * d_t       # C_T @ D_T rows

    def build(kind, count, refl_dep, c_r_all):
        h = np.zeros((count, S, num_tiles + 1, n_t), dtype=complex)
        for i in range(count):
            c_d = (instance.ir_c_d if kind == "ir" else instance.er_c_d)[i]
            d_d = instance.d_direct(kind, i)
            h_direct_h = c_d @ d_d            # 1^H C_D D_D, shape (N_T,)
            h[i, :, 0, :] = np.conj(h_direct_h)[None, :]
            out_uv = refl_dep[i].uv
            c_r = c_r_all[i]
            for t, tile in enumerate(tiles):
                resp = tile_response_grid(tile, codebook, in_uv, out_uv,
                                          instance.unit_cell_amplitude)
                # row vector per mode: (c_r^T R_s) @ (C_T D_T)
                left = np.einsum("l,slm->sm", c_r, resp)      # (S, L_in)
                h_h = left @ ct_dt                              # (S, N_T)
                h[i, :, t + 1, :] = np.conj(h_h)
        return h

    h_ir = build("ir", len(instance.ir_c_r), instance.ir_reflect_departure,
                 instance.ir_c_r)
    h_er = build("er", len(instance.er_c_r), instance.er_reflect_departure,
                 instance.er_c_r)
    return ChannelSet(h_ir, h_er, tuple(range(S)))


# --- text fixture format ----------------------------------------------------
# Header line:  "channelset K J S T N"
# Mode map:     "modes i0 i1 ... i{S-1}"
# Data lines:   "<r> <i> <s> <t> re0 im0 re1 im1 ..." one per (r, i, s, t)

def export_channels(channels: ChannelSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"channelset {channels.num_irs} {channels.num_ers} "
                 f"{channels.num_modes} {channels.num_tiles} {channels.num_antennas}\n")
        fh.write("modes " + " ".join(str(m) for m in channels.mode_indices) + "\n")
        for kind, i in channels.receivers():
            tensor = channels.vectors(kind, i)
            for s in range(channels.num_modes):
                for t in range(channels.num_tiles + 1):
                    vals = " ".join(f"{v.real:.17g} {v.imag:.17g}" for v in tensor[s, t])
                    fh.write(f"{kind} {i} {s} {t} {vals}\n")


def import_channels(path) -> ChannelSet:
    with open(path, "r", encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 6 or head[0] != "channelset":
            raise ValueError(f"{path}: not a channel set file")
        K, J, S, T, N = map(int, head[1:])
        modes_line = fh.readline().split()
        if modes_line[0] != "modes" or len(modes_line) != S + 1:
            raise ValueError(f"{path}: malformed mode map")
        mode_indices = tuple(int(x) for x in modes_line[1:])
        h_ir = np.zeros((K, S, T + 1, N), dtype=complex)
        h_er = np.zeros((J, S, T + 1, N), dtype=complex)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            kind, i, s, t = parts[0], int(parts[1]), int(parts[2]), int(parts[3])
            vals = np.array(list(map(float, parts[4:])))
            vec = vals[0::2] + 1j * vals[1::2]
            (h_ir if kind == "ir" else h_er)[i, s, t] = vec
    return ChannelSet(h_ir, h_er, mode_indices)
