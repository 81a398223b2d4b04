"""Real standard-form conic programs over Hermitian PSD, nonnegative and free
blocks, solved by an embedded interior-point backend (Clarabel).

A PSD block of dimension N holds the N*N real coordinates of a complex
Hermitian matrix (N diagonal entries, then Re/Im of each upper off-diagonal
entry).  Cone membership and linear-matrix-inequality constraints are lowered
through the 2N x 2N real symmetric embedding [[X, -Y], [Y, X]] of H = X + jY;
the embedding doubles traces and eigenvalue multiplicities, so a 1/2 factor
compensates wherever traces cross the boundary (see :func:`realify`).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel


class ConicSolverError(RuntimeError):
    """Numerical failure distinct from a certified infeasibility."""


# --- Hermitian coordinates ---------------------------------------------------

def herm_num_coords(n: int) -> int:
    return n * n


def herm_coord_table(n: int):
    """Coordinate order: (i,i) diagonals, then (Re, Im) per upper pair."""
    table = [(i, i, "d") for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            table.append((i, j, "re"))
            table.append((i, j, "im"))
    return table


def herm_to_vec(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    out = np.empty(n * n)
    out[:n] = np.real(np.diag(h))
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = h[i, j].real
            out[k + 1] = h[i, j].imag
            k += 2
    return out


def vec_to_herm(x: np.ndarray, n: int) -> np.ndarray:
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = x[:n]
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            h[i, j] = x[k] + 1j * x[k + 1]
            h[j, i] = x[k] - 1j * x[k + 1]
            k += 2
    return h


def inner_vec(a: np.ndarray) -> np.ndarray:
    """Vector v with v . herm_to_vec(H) == Tr(A H) for Hermitian A, H."""
    n = a.shape[0]
    out = np.empty(n * n)
    out[:n] = np.real(np.diag(a))
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = 2.0 * a[i, j].real
            out[k + 1] = 2.0 * a[i, j].imag
            k += 2
    return out


# --- real symmetric embedding ------------------------------------------------

class Realify:
    """Index map from Hermitian coordinates of dimension ``n`` to the svec of
    the 2n x 2n real symmetric embedding (column-wise upper triangle,
    off-diagonals scaled by sqrt(2), matching the backend's PSD cone).

    Tr(embedding) = 2 Tr(H): apply the documented 1/2 factor when converting
    embedded traces back to complex-domain power.
    """

    def __init__(self, n: int):
        self.n = n
        self.svec_len = n * (2 * n + 1)  # (2n)(2n+1)/2
        # per Hermitian coordinate: (svec indices, coefficients)
        idx, cof = [], []
        for (i, j, kind) in herm_coord_table(n):
            if kind == "d":
                idx.append([self._svec(i, i), self._svec(n + i, n + i)])
                cof.append([1.0, 1.0])
            elif kind == "re":
                idx.append([self._svec(i, j), self._svec(n + i, n + j)])
                cof.append([math.sqrt(2.0), math.sqrt(2.0)])
            else:  # im: upper-right block holds -Y, Y_ij = Im H_ij
                idx.append([self._svec(i, n + j), self._svec(j, n + i)])
                cof.append([-math.sqrt(2.0), math.sqrt(2.0)])
        self.entry_idx = np.array(idx)
        self.entry_cof = np.array(cof)

    def _svec(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return j * (j + 1) // 2 + i

    def embed(self, h: np.ndarray) -> np.ndarray:
        """Dense 2n x 2n real embedding (for tests and constants)."""
        x, y = h.real, h.imag
        return np.block([[x, -y], [y, x]])

    def svec_of(self, h: np.ndarray) -> np.ndarray:
        """svec of the embedding of a Hermitian matrix."""
        e = self.embed(h)
        m = 2 * self.n
        out = np.empty(self.svec_len)
        k = 0
        for j in range(m):
            for i in range(j + 1):
                out[k] = e[i, j] * (1.0 if i == j else math.sqrt(2.0))
                k += 1
        return out

    def unsvec(self, v: np.ndarray) -> np.ndarray:
        """Inverse of svec on the embedded space (returns 2n x 2n symmetric)."""
        m = 2 * self.n
        e = np.zeros((m, m))
        k = 0
        for j in range(m):
            for i in range(j + 1):
                val = v[k] / (1.0 if i == j else math.sqrt(2.0))
                e[i, j] = e[j, i] = val
                k += 1
        return e


_REALIFY_CACHE: dict = {}


def realify(n: int) -> Realify:
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    if n not in _REALIFY_CACHE:
        _REALIFY_CACHE[n] = Realify(n)
    return _REALIFY_CACHE[n]


# --- problem containers -------------------------------------------------------

PSD, NONNEG, FREE = "psd", "nonneg", "free"


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    dim: int          # psd: Hermitian dimension; nonneg/free: scalar count
    name: str = ""

    @property
    def num_coords(self) -> int:
        return herm_num_coords(self.dim) if self.kind == PSD else self.dim


@dataclass
class LinearRow:
    coords: np.ndarray
    coeffs: np.ndarray
    sense: str        # "==", "<=", ">="
    rhs: float
    label: str = ""


@dataclass
class LMI:
    """const + sum_e coeffs[e] * x[var_coords[e]] at entry (rows[e], cols[e])
    (upper triangle, Hermitian completion implied) must be PSD."""

    dim: int
    var_coords: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    coeffs: np.ndarray            # complex
    const: np.ndarray | None = None
    label: str = ""


@dataclass
class ConicProblem:
    blocks: list
    obj_coords: np.ndarray
    obj_coeffs: np.ndarray
    obj_offset: float
    rows: list
    lmis: list
    meta: dict = field(default_factory=dict)

    @property
    def block_offsets(self) -> list:
        offs, base = [], 0
        for b in self.blocks:
            offs.append(base)
            base += b.num_coords
        return offs

    @property
    def num_coords(self) -> int:
        return sum(b.num_coords for b in self.blocks)

    def block_index(self, name: str) -> int:
        for i, b in enumerate(self.blocks):
            if b.name == name:
                return i
        raise KeyError(name)


@dataclass
class ConicSolution:
    status: str                    # Optimal | Infeasible | Unbounded | NumericalFailure
    objective: float | None
    objective_dual: float | None
    x: np.ndarray | None
    block_values: dict
    row_duals: list
    gap: float | None
    iterations: int
    solve_time: float
    diagnostics: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "Optimal"


class ProblemBuilder:
    """Incremental construction of a ConicProblem with named blocks."""

    def __init__(self):
        self.blocks: list[ConeBlock] = []
        self._offsets: list[int] = []
        self._base = 0
        self.rows: list[LinearRow] = []
        self.lmis: list[LMI] = []
        self._obj: dict[int, float] = {}
        self.obj_offset = 0.0
        self.meta: dict = {}

    def add_block(self, kind: str, dim: int, name: str = "") -> int:
        blk = ConeBlock(kind, dim, name)
        self.blocks.append(blk)
        self._offsets.append(self._base)
        self._base += blk.num_coords
        return len(self.blocks) - 1

    def coords_of(self, block: int) -> np.ndarray:
        return self._offsets[block] + np.arange(self.blocks[block].num_coords)

    def scalar_coord(self, block: int, k: int = 0) -> int:
        return self._offsets[block] + k

    def add_objective(self, coords, coeffs) -> None:
        for c, v in zip(np.atleast_1d(coords), np.atleast_1d(coeffs)):
            if v != 0.0:
                self._obj[int(c)] = self._obj.get(int(c), 0.0) + float(v)

    def add_row(self, coords, coeffs, sense: str, rhs: float, label: str = "") -> None:
        coords = np.atleast_1d(np.asarray(coords, dtype=int))
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        keep = coeffs != 0.0
        self.rows.append(LinearRow(coords[keep], coeffs[keep], sense, float(rhs), label))

    def trace_entries(self, block: int, a: np.ndarray):
        """(coords, coeffs) with coeffs . x == Tr(A X_block)."""
        return self.coords_of(block), inner_vec(a)

    def add_lmi(self, dim: int, terms, const: np.ndarray | None = None,
                label: str = "") -> None:
        """terms: iterable of (kind, payload):
        ("block", block_idx, scale)        -> scale * X_block
        ("scaled_identity", coord, scale)  -> scale * x_coord * I
        """
        vc, ri, ci, cf = [], [], [], []
        table_cache = {}
        for term in terms:
            if term[0] == "block":
                _, blk, scale = term
                n = self.blocks[blk].dim
                base = self._offsets[blk]
                table = table_cache.setdefault(n, herm_coord_table(n))
                for local, (i, j, kind) in enumerate(table):
                    vc.append(base + local)
                    ri.append(i)
                    ci.append(j)
                    cf.append(scale * (1j if kind == "im" else 1.0))
            elif term[0] == "scaled_identity":
                _, coord, scale = term
                for i in range(dim):
                    vc.append(coord)
                    ri.append(i)
                    ci.append(i)
                    cf.append(scale)
            else:
                raise ValueError(f"unknown LMI term {term[0]}")
        self.lmis.append(LMI(dim, np.array(vc, dtype=int), np.array(ri, dtype=int),
                             np.array(ci, dtype=int), np.array(cf, dtype=complex),
                             const, label))

    def build(self) -> ConicProblem:
        coords = np.array(sorted(self._obj), dtype=int)
        coeffs = np.array([self._obj[c] for c in coords])
        return ConicProblem(list(self.blocks), coords, coeffs, self.obj_offset,
                            list(self.rows), list(self.lmis), dict(self.meta))


# --- lowering and solve -------------------------------------------------------

_STATUS_MAP = {
    "Solved": "Optimal",
    "PrimalInfeasible": "Infeasible",
    "DualInfeasible": "Unbounded",
}


def solve_conic(problem: ConicProblem, tol: float = 1e-8,
                max_iter: int = 200, verbose: bool = False,
                accept_tol: float | None = None,
                infeas_tol: float | None = None) -> ConicSolution:
    """Solve to relative duality gap / primal residual ``tol``.

    The backend drives toward ``tol``; the terminal iterate is reported
    Optimal iff its primal residual and true relative gap are within
    ``accept_tol`` (default: ``tol``), so a caller may drive hard and accept
    a slightly looser certified accuracy instead of re-solving.
    Infeasibility is certified by the backend (improving-ray certificate, at
    quality ``infeas_tol``) and reported distinctly from numerical failure.
    """
    if accept_tol is None:
        accept_tol = tol
    if infeas_tol is None:
        infeas_tol = max(tol, 1e-7)
    pinned = _pinned_values(problem)
    offsets = problem.block_offsets
    # variable identification: aliased blocks share their target's coordinates
    rep = np.arange(problem.num_coords)
    aliased = dict(problem.meta.get("aliased", {}))
    for src, dst in aliased.items():
        while dst in aliased:          # follow chains
            dst = aliased[dst]
        nb = problem.blocks[src].num_coords
        rep[offsets[src]: offsets[src] + nb] = \
            np.arange(offsets[dst], offsets[dst] + nb)
    pinned = {int(rep[c]): v for c, v in pinned.items()}
    keep = rep == np.arange(problem.num_coords)
    if pinned:
        keep[list(pinned)] = False
    new_index = np.cumsum(keep) - 1          # representative -> reduced coord
    nvar = int(keep.sum())
    pin_vec = np.zeros(problem.num_coords)
    for c, v in pinned.items():
        pin_vec[c] = v

    a_rows, b_vals = [], []
    eq_rows, ineq_rows = [], []
    row_kinds = []
    for row in problem.rows:
        rc = rep[row.coords]
        mask = keep[rc]
        rhs = row.rhs - float(np.dot(row.coeffs[~mask], pin_vec[rc[~mask]]))
        coords = new_index[rc[mask]]
        coeffs = row.coeffs[mask]
        if coords.size == 0:
            # fully pinned row reduces to 0 (sense) rhs
            slack = 1e-7 * (1 + abs(rhs))
            if row.sense == "<=":
                ok = 0.0 <= rhs + slack
            elif row.sense == ">=":
                ok = 0.0 >= rhs - slack
            else:
                ok = abs(rhs) <= slack
            if not ok:
                return ConicSolution("Infeasible", None, None, None, {}, [], None,
                                     0, 0.0, f"pinned row violated: {row.label}")
            row_kinds.append(("dropped", None))
            continue
        if row.sense == "==":
            eq_rows.append((coords, coeffs, rhs))
            row_kinds.append(("eq", len(eq_rows) - 1))
        elif row.sense == "<=":
            ineq_rows.append((coords, coeffs, rhs))
            row_kinds.append(("ineq", len(ineq_rows) - 1, 1.0))
        elif row.sense == ">=":
            ineq_rows.append((coords, -coeffs, -rhs))
            row_kinds.append(("ineq", len(ineq_rows) - 1, -1.0))
        else:
            raise ValueError(f"unknown sense {row.sense}")

    # nonneg variable blocks lower to inequality rows x >= 0
    for bi, blk in enumerate(problem.blocks):
        if blk.kind == NONNEG:
            for local in range(blk.dim):
                c = int(rep[offsets[bi] + local])
                if keep[c]:
                    ineq_rows.append((np.array([new_index[c]]), np.array([-1.0]), 0.0))

    def emit(coords, coeffs, rhs):
        b_vals.append(rhs)
        a_rows.append((coords, coeffs))

    for coords, coeffs, rhs in eq_rows:
        emit(coords, coeffs, rhs)
    n_eq = len(eq_rows)
    for coords, coeffs, rhs in ineq_rows:
        emit(coords, coeffs, rhs)
    n_ineq = len(ineq_rows)

    psd_cones = []
    zero_blocks = set(problem.meta.get("zero_blocks", ()))
    for bi, blk in enumerate(problem.blocks):
        if blk.kind != PSD or bi in zero_blocks or bi in aliased:
            continue
        r = realify(blk.dim)
        base = offsets[bi]
        rows_entries = [[] for _ in range(r.svec_len)]
        for local in range(blk.num_coords):
            c = int(rep[base + local])
            if not keep[c]:
                continue
            for s_idx, s_cof in zip(r.entry_idx[local], r.entry_cof[local]):
                rows_entries[s_idx].append((new_index[c], -s_cof))
        for k in range(r.svec_len):
            cc = np.array([e[0] for e in rows_entries[k]], dtype=int)
            vv = np.array([e[1] for e in rows_entries[k]])
            emit(cc, vv, 0.0)
        psd_cones.append(2 * blk.dim)

    for lmi in problem.lmis:
        r = realify(lmi.dim)
        rows_entries = [[] for _ in range(r.svec_len)]
        const = np.zeros(r.svec_len)
        if lmi.const is not None:
            const = r.svec_of(lmi.const)
        for vc, i, j, cf in zip(lmi.var_coords, lmi.rows, lmi.cols, lmi.coeffs):
            vc = int(rep[vc])
            pieces = _entry_svec(r, int(i), int(j), complex(cf))
            if keep[vc]:
                for s_idx, s_cof in pieces:
                    rows_entries[s_idx].append((new_index[vc], -s_cof))
            else:
                for s_idx, s_cof in pieces:
                    const[s_idx] += s_cof * pin_vec[vc]
        if all(len(e) == 0 for e in rows_entries):
            h = r.unsvec(const)
            if np.linalg.norm(h) > 0 and np.linalg.eigvalsh(h).min() < -1e-7 * (1 + np.abs(h).max()):
                return ConicSolution("Infeasible", None, None, None, {}, [], None,
                                     0, 0.0, f"pinned LMI violated: {lmi.label}")
            continue
        for k in range(r.svec_len):
            cc = np.array([e[0] for e in rows_entries[k]], dtype=int)
            vv = np.array([e[1] for e in rows_entries[k]])
            emit(cc, vv, const[k])
        psd_cones.append(2 * lmi.dim)

    m = len(b_vals)
    data_l, row_l, col_l = [], [], []
    for ri, (coords, coeffs) in enumerate(a_rows):
        for c, v in zip(coords, coeffs):
            if v != 0.0:
                row_l.append(ri)
                col_l.append(int(c))
                data_l.append(float(v))
    A = sparse.csc_matrix((data_l, (row_l, col_l)), shape=(m, nvar))
    bvec = np.array(b_vals)

    q = np.zeros(nvar)
    obj_offset = problem.obj_offset
    for c, v in zip(problem.obj_coords, problem.obj_coeffs):
        c = int(rep[c])
        if keep[c]:
            q[new_index[c]] += v
        else:
            obj_offset += v * pin_vec[c]

    cones = []
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))
    if n_ineq:
        cones.append(clarabel.NonnegativeConeT(n_ineq))
    for d in psd_cones:
        cones.append(clarabel.PSDTriangleConeT(d))

    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    # purely relative optimality measures: problems solve in normalized units
    # whose objective magnitude varies over many decades, so absolute gap
    # thresholds would silently loosen the relative accuracy
    settings.tol_gap_abs = 0.0
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_infeas_abs = infeas_tol
    settings.tol_infeas_rel = infeas_tol
    settings.max_iter = max_iter
    settings.max_threads = 1
    P = sparse.csc_matrix((nvar, nvar))
    solver = clarabel.DefaultSolver(P, q, A, bvec, cones, settings)
    raw = solver.solve()

    status_name = str(raw.status).split(".")[-1]
    status = _STATUS_MAP.get(status_name, "NumericalFailure")
    if status != "Infeasible" and status != "Unbounded" and raw.x is not None \
            and raw.obj_val is not None:
        # optimality contract on the terminal iterate, whatever the backend
        # called the termination
        rel_gap = abs(raw.obj_val - raw.obj_val_dual) / \
            max(abs(raw.obj_val), abs(raw.obj_val_dual), 1e-12)
        if raw.r_prim <= accept_tol and rel_gap <= accept_tol:
            status = "Optimal"
        else:
            status = "NumericalFailure"
            status_name += (f" (r_prim={raw.r_prim:.2e}, rel_gap={rel_gap:.2e})")
    if status != "Optimal":
        return ConicSolution(status, None, None, None, {}, [], None,
                             raw.iterations, raw.solve_time,
                             f"backend status {status_name}")

    x_red = np.asarray(raw.x)
    x = np.empty(problem.num_coords)
    x[keep] = x_red
    x[~keep] = pin_vec[~keep]
    x = x[rep]  # aliased coordinates take their representative's value

    block_values = {}
    for bi, blk in enumerate(problem.blocks):
        vals = x[offsets[bi]: offsets[bi] + blk.num_coords]
        if blk.kind == PSD:
            block_values[blk.name or f"block{bi}"] = vec_to_herm(vals, blk.dim)
        else:
            block_values[blk.name or f"block{bi}"] = vals.copy()

    z = np.asarray(raw.z)
    row_duals = []
    for kind in row_kinds:
        if kind[0] == "dropped":
            row_duals.append(0.0)
        elif kind[0] == "eq":
            row_duals.append(float(z[kind[1]]))
        else:
            row_duals.append(float(z[n_eq + kind[1]]) * kind[2])

    objective = float(raw.obj_val) + obj_offset
    objective_dual = float(raw.obj_val_dual) + obj_offset
    gap = abs(objective - objective_dual) / \
        max(abs(objective), abs(objective_dual), 1e-12)
    return ConicSolution("Optimal", objective, objective_dual, x, block_values,
                         row_duals, gap, raw.iterations, raw.solve_time)


def _pinned_values(problem: ConicProblem) -> dict:
    pinned = dict(problem.meta.get("pinned", {}))
    offsets = problem.block_offsets
    for bi in problem.meta.get("zero_blocks", ()):
        blk = problem.blocks[bi]
        for local in range(blk.num_coords):
            pinned[offsets[bi] + local] = 0.0
    return pinned


def _entry_svec(r: Realify, i: int, j: int, cf: complex):
    """svec coefficients of cf placed at Hermitian entry (i, j) (i <= j),
    with the conjugate mirrored at (j, i)."""
    out = []
    n = r.n
    if i == j:
        # real diagonal contribution
        out.append((r._svec(i, i), cf.real))
        out.append((r._svec(n + i, n + i), cf.real))
    else:
        if cf.real != 0.0:
            out.append((r._svec(i, j), cf.real * math.sqrt(2.0)))
            out.append((r._svec(n + i, n + j), cf.real * math.sqrt(2.0)))
        if cf.imag != 0.0:
            out.append((r._svec(i, n + j), -cf.imag * math.sqrt(2.0)))
            out.append((r._svec(j, n + i), cf.imag * math.sqrt(2.0)))
    return out


# --- text interchange dump ----------------------------------------------------

def dump_problem(problem: ConicProblem, path) -> None:
    """Documented text dump: block table, objective triplets, row triplets,
    and LMI entry triplets, for external cross-checking."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"conicproblem blocks={len(problem.blocks)} rows={len(problem.rows)} "
                 f"lmis={len(problem.lmis)}\n")
        for b in problem.blocks:
            fh.write(f"block {b.kind} {b.dim} {b.name}\n")
        fh.write(f"objective offset={problem.obj_offset:.17g}\n")
        for c, v in zip(problem.obj_coords, problem.obj_coeffs):
            fh.write(f"obj {c} {v:.17g}\n")
        for ri, row in enumerate(problem.rows):
            fh.write(f"row {ri} {row.sense} {row.rhs:.17g} {row.label}\n")
            for c, v in zip(row.coords, row.coeffs):
                fh.write(f"  {c} {v:.17g}\n")
        for li, lmi in enumerate(problem.lmis):
            fh.write(f"lmi {li} dim={lmi.dim} {lmi.label}\n")
            for vc, i, j, cf in zip(lmi.var_coords, lmi.rows, lmi.cols, lmi.coeffs):
                fh.write(f"  {vc} {i} {j} {cf.real:.17g} {cf.imag:.17g}\n")
