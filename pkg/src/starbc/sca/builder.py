"""Small conic-program builder used by the subproblem solvers.

Variables are scalars or complex Hermitian matrices; a Hermitian variable of
side d occupies d^2 real parameters (diagonal, then sqrt(2)-scaled real and
imaginary upper-triangle parts), so trace-linear forms Tr(C X) have the
coefficient vector `herm_coeff(C)` and the PSD requirement is imposed on the
real embedding of X through a fixed sparse map.

Row order in the assembled program is canonical (zero, nonneg, soc, rsoc,
then one PSD block per Hermitian variable in declaration order), so programs
built by the same code path across SCA passes share their structure and the
previous (x, y, s) can warm-start the next solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ..conic import ConeProgram, SolverResult, cone_rows, smat, solve


@lru_cache(maxsize=None)
def _upper_pairs(d: int):
    """(i, j) with i < j, column-major; fixed parameter order."""
    return [(i, j) for j in range(d) for i in range(j)]


def herm_coeff(c: np.ndarray) -> np.ndarray:
    """Real coefficient vector v with v @ params(X) = Tr(C X), C Hermitian."""
    d = c.shape[0]
    pairs = _upper_pairs(d)
    out = np.empty(d * d)
    out[:d] = np.real(np.diag(c))
    re = np.array([np.sqrt(2.0) * c[i, j].real for i, j in pairs])
    im = np.array([np.sqrt(2.0) * c[i, j].imag for i, j in pairs])
    out[d:d + len(pairs)] = re
    out[d + len(pairs):] = im
    return out


def herm_params(x: np.ndarray) -> np.ndarray:
    """Parameter vector of a Hermitian matrix (inverse of `herm_matrix`)."""
    d = x.shape[0]
    pairs = _upper_pairs(d)
    out = np.empty(d * d)
    out[:d] = np.real(np.diag(x))
    out[d:d + len(pairs)] = [np.sqrt(2.0) * x[i, j].real for i, j in pairs]
    out[d + len(pairs):] = [np.sqrt(2.0) * x[i, j].imag for i, j in pairs]
    return out


def herm_matrix(params: np.ndarray, d: int) -> np.ndarray:
    pairs = _upper_pairs(d)
    x = np.zeros((d, d), dtype=complex)
    x[np.diag_indices(d)] = params[:d]
    for p, (i, j) in enumerate(pairs):
        val = (params[d + p] + 1j * params[d + len(pairs) + p]) / np.sqrt(2.0)
        x[i, j] = val
        x[j, i] = val.conjugate()
    return x


@lru_cache(maxsize=None)
def _embed_map(d: int):
    """COO triplets of the map params(X) -> svec(embed(X)) (2 nnz/column)."""
    from ..conic import _svec_index  # shared packing convention

    ii, jj, w = _svec_index(2 * d)
    pos = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(ii, jj))}

    def svec_entry(a, b):
        return (pos[(a, b)], np.sqrt(2.0)) if a > b else (pos[(b, a)], np.sqrt(2.0)) \
            if b > a else (pos[(a, a)], 1.0)

    rows, cols, vals = [], [], []
    col = 0
    for i in range(d):        # diagonal params: Re X_ii at (i,i) and (d+i,d+i)
        for (a, b) in ((i, i), (d + i, d + i)):
            r, wt = svec_entry(a, b)
            rows.append(r); cols.append(col); vals.append(wt * 1.0)
        col += 1
    pairs = _upper_pairs(d)
    for (i, j) in pairs:      # re params: value 1/sqrt(2) at (i,j) and (d+i,d+j)
        for (a, b) in ((i, j), (d + i, d + j)):
            r, wt = svec_entry(a, b)
            rows.append(r); cols.append(col); vals.append(wt / np.sqrt(2.0))
        col += 1
    for (i, j) in pairs:      # im params: -Im at (i, d+j) is -1/sqrt(2); +Im at (j, d+i)
        r, wt = svec_entry(i, d + j)
        rows.append(r); cols.append(col); vals.append(-wt / np.sqrt(2.0))
        r, wt = svec_entry(j, d + i)
        rows.append(r); cols.append(col); vals.append(wt / np.sqrt(2.0))
        col += 1
    return np.array(rows), np.array(cols), np.array(vals), d * (2 * d + 1)


def embed_from_svec(vec: np.ndarray, d: int) -> np.ndarray:
    """Hermitian matrix from the svec of its (projected) real embedding."""
    s = smat(vec)
    re = 0.5 * (s[:d, :d] + s[d:, d:])
    im = s[d:, :d]
    x = re + 1j * 0.5 * (im - im.T)
    return 0.5 * (x + x.conj().T)


@dataclass
class Expr:
    """Affine expression: sum over variables of coeff . params + const."""

    coeffs: dict[str, np.ndarray] = field(default_factory=dict)
    const: float = 0.0

    def copy(self) -> "Expr":
        return Expr({k: v.copy() for k, v in self.coeffs.items()}, self.const)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, Expr):
            for k, v in other.coeffs.items():
                out.coeffs[k] = out.coeffs.get(k, 0.0) + v
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __neg__(self):
        return Expr({k: -v for k, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Expr) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return Expr({k: v * scalar for k, v in self.coeffs.items()}, self.const * scalar)

    __rmul__ = __mul__


def const_expr(value: float) -> Expr:
    return Expr({}, float(value))


@dataclass
class ScalarVar:
    name: str

    def expr(self) -> Expr:
        return Expr({self.name: np.ones(1)}, 0.0)


@dataclass
class HermVar:
    name: str
    dim: int

    def trace(self, c: np.ndarray) -> Expr:
        """Tr(C X) as an affine expression (C Hermitian)."""
        return Expr({self.name: herm_coeff(c)}, 0.0)

    def param_expr(self, coeff: np.ndarray) -> Expr:
        return Expr({self.name: np.asarray(coeff, dtype=float)}, 0.0)


class ProgramBuilder:
    def __init__(self):
        self._vars: dict[str, tuple[int, int]] = {}   # name -> (offset, width)
        self._herm: dict[str, int] = {}               # name -> dim (PSD order)
        self._n = 0
        self._objective: Expr = const_expr(0.0)
        self._rows: dict[str, list] = {"zero": [], "nonneg": []}
        self._segments: list[tuple[str, list[Expr]]] = []   # soc / rsoc

    # ---- variables ----
    def scalar(self, name: str) -> ScalarVar:
        self._register(name, 1)
        return ScalarVar(name)

    def hermitian(self, name: str, dim: int, psd: bool = True) -> HermVar:
        self._register(name, dim * dim)
        if psd:
            self._herm[name] = dim
        return HermVar(name, dim)

    def _register(self, name: str, width: int):
        if name in self._vars:
            raise ValueError(f"duplicate variable {name!r}")
        self._vars[name] = (self._n, width)
        self._n += width

    # ---- objective / constraints ----
    def minimize(self, expr: Expr) -> None:
        self._objective = expr

    def add_equal(self, expr: Expr, rhs: float = 0.0) -> None:
        self._rows["zero"].append(expr - rhs)

    def add_nonneg(self, expr: Expr) -> None:
        """expr >= 0."""
        self._rows["nonneg"].append(expr)

    def add_soc(self, head: Expr, tail: list[Expr]) -> None:
        """||tail|| <= head."""
        self._segments.append(("soc", [head] + list(tail)))

    def add_rsoc(self, a: Expr, b: Expr, tail: list[Expr]) -> None:
        """2 a b >= ||tail||^2, a, b >= 0."""
        self._segments.append(("rsoc", [a, b] + list(tail)))

    # ---- assembly ----
    def _expr_row(self, expr: Expr, row_idx: int, rows, cols, vals, bvec):
        # s = b - A x with s = expr  =>  A entries are -coeff, b = const
        for name, coef in expr.coeffs.items():
            off, width = self._vars[name]
            coef = np.asarray(coef, dtype=float)
            nz = np.flatnonzero(coef)
            rows.append(np.full(nz.size, row_idx))
            cols.append(off + nz)
            vals.append(-coef[nz])
        bvec.append(expr.const)

    def build(self) -> "BuiltProgram":
        rows, cols, vals, bvec = [], [], [], []
        cones: list[tuple[str, int]] = []
        r = 0
        for kind in ("zero", "nonneg"):
            for expr in self._rows[kind]:
                self._expr_row(expr, r, rows, cols, vals, bvec)
                r += 1
            if self._rows[kind]:
                cones.append((kind, len(self._rows[kind])))
        for kind, seg in self._segments:
            for expr in seg:
                self._expr_row(expr, r, rows, cols, vals, bvec)
                r += 1
            cones.append((kind, len(seg)))
        herm_slices = {}
        for name, dim in self._herm.items():
            er, ec, ev, nrows = _embed_map(dim)
            off, _ = self._vars[name]
            rows.append(er + r)
            cols.append(ec + off)
            vals.append(-ev)          # s = G x  =>  A = -G, b = 0
            bvec.extend([0.0] * nrows)
            herm_slices[name] = (r, r + nrows, dim)
            cones.append(("psd", 2 * dim))
            r += nrows

        c = np.zeros(self._n)
        for name, coef in self._objective.coeffs.items():
            off, width = self._vars[name]
            c[off:off + width] += coef

        rows = np.concatenate([np.asarray(a, dtype=int) for a in rows]) if rows else np.zeros(0, int)
        cols = np.concatenate([np.asarray(a, dtype=int) for a in cols]) if cols else np.zeros(0, int)
        vals = np.concatenate([np.asarray(a, dtype=float) for a in vals]) if vals else np.zeros(0)
        a_mat = sp.coo_matrix((vals, (rows, cols)), shape=(r, self._n)).tocsr()
        prog = ConeProgram(c=c, A=a_mat, b=np.array(bvec), cones=cones)
        return BuiltProgram(prog, dict(self._vars), herm_slices,
                            self._objective.const)


@dataclass
class BuiltProgram:
    program: ConeProgram
    var_slices: dict[str, tuple[int, int]]
    herm_slices: dict[str, tuple[int, int, int]]
    objective_offset: float

    def solve(self, tol: float = 1e-6, max_iter: int = 50000,
              warm: tuple | None = None) -> "Solution":
        res = solve(self.program, tol=tol, max_iter=max_iter, warm=warm)
        return Solution(self, res)


@dataclass
class Solution:
    built: BuiltProgram
    result: SolverResult

    @property
    def status(self) -> str:
        return self.result.status

    @property
    def objective(self) -> float:
        return self.result.objective + self.built.objective_offset

    def scalar(self, name: str) -> float:
        off, width = self.built.var_slices[name]
        return float(self.result.x[off])

    def value(self, expr: Expr) -> float:
        total = expr.const
        for name, coef in expr.coeffs.items():
            off, width = self.built.var_slices[name]
            total += float(np.dot(coef, self.result.x[off:off + width]))
        return total

    def hermitian(self, name: str, from_slack: bool = True) -> np.ndarray:
        """Hermitian solution block; `from_slack` reads the PSD-projected
        cone slack (exactly PSD), else the raw variable parameters."""
        if from_slack and name in self.built.herm_slices:
            lo, hi, dim = self.built.herm_slices[name]
            return embed_from_svec(self.result.s[lo:hi], dim)
        off, width = self.built.var_slices[name]
        dim = int(round(np.sqrt(width)))
        return herm_matrix(self.result.x[off:off + width], dim)

    def warm_triplet(self):
        return (self.result.x, self.result.y, self.result.s)
