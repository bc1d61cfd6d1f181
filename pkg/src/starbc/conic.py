"""Dense operator-splitting conic solver.

Solves   min c^T x   s.t.  A x + s = b,  s in K,

where K is an ordered product of zero, nonnegative, second-order, rotated
second-order and PSD cones (PSD blocks in scaled-vector form, svec).  The
algorithm is the homogeneous self-dual embedding splitting: each iteration
alternates one cached linear-system solve with cone projections, with
over-relaxation.  Complex Hermitian constraints enter through the real
embedding (`embed_hermitian`).

Scaled residuals follow the standard splitting-solver convention:

    primal   ||A x + s - b||_2 / (1 + ||b||_2)
    dual     ||A^T y + c||_2 / (1 + ||c||_2)
    gap      |c^T x + b^T y| / (1 + |c^T x| + |b^T y|)

and status == "optimal" certifies all three are <= tol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

LN2 = float(np.log(2.0))

# cone kinds: ("zero", n) ("nonneg", n) ("soc", n) ("rsoc", n) ("psd", side)
ConeList = list[tuple[str, int]]


class ConicError(Exception):
    pass


class NumericalFailure(ConicError):
    """NaN/inf detected during iteration; carries the offending iterate."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


def cone_rows(kind: str, size: int) -> int:
    return size * (size + 1) // 2 if kind == "psd" else size


@dataclass
class ConeProgram:
    c: np.ndarray
    A: "np.ndarray | sp.spmatrix"
    b: np.ndarray
    cones: ConeList

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if not sp.issparse(self.A):
            self.A = np.asarray(self.A, dtype=float)
        m, n = self.A.shape
        if self.c.size != n or self.b.size != m:
            raise ConicError(f"dimension mismatch: A is {m}x{n}, "
                             f"c has {self.c.size}, b has {self.b.size}")
        rows = sum(cone_rows(k, s) for k, s in self.cones)
        if rows != m:
            raise ConicError(f"cone segments cover {rows} rows, A has {m}")
        for kind, size in self.cones:
            if kind not in ("zero", "nonneg", "soc", "rsoc", "psd"):
                raise ConicError(f"unknown cone kind {kind!r}")
            if size < 1 or (kind in ("soc", "rsoc") and size < 2):
                raise ConicError(f"bad cone size {size} for {kind}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass
class SolverResult:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: str                 # optimal | max_iter | infeasible_suspected
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    objective: float

    @property
    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.gap)


# ---------------------------------------------------------------- svec ----

@lru_cache(maxsize=None)
def _svec_index(s: int):
    """Lower-triangular column-major (i, j) indices and sqrt(2) weights."""
    ii, jj = [], []
    for j in range(s):
        for i in range(j, s):
            ii.append(i)
            jj.append(j)
    ii = np.array(ii)
    jj = np.array(jj)
    w = np.where(ii == jj, 1.0, np.sqrt(2.0))
    return ii, jj, w


def svec(smat: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix so that <svec(A), svec(B)> = Tr(AB)."""
    ii, jj, w = _svec_index(smat.shape[0])
    return smat[ii, jj] * w


def smat(vec: np.ndarray) -> np.ndarray:
    """Inverse of svec."""
    s = int(round((np.sqrt(8 * vec.size + 1) - 1) / 2))
    ii, jj, w = _svec_index(s)
    out = np.zeros((s, s))
    out[ii, jj] = vec / w
    out[jj, ii] = out[ii, jj]
    return out


# ---------------------------------------------------------- projections ----

def project_psd(s_in: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clamp negative eigenvalues to zero."""
    scale = max(1.0, float(np.max(np.abs(s_in))) if s_in.size else 1.0)
    if np.max(np.abs(s_in - s_in.T)) > 1e-9 * scale:
        raise ConicError("project_psd requires a symmetric matrix")
    w, v = np.linalg.eigh(0.5 * (s_in + s_in.T))
    wc = np.maximum(w, 0.0)
    return (v * wc) @ v.T


def _project_soc(seg: np.ndarray) -> np.ndarray:
    t, z = seg[0], seg[1:]
    nz = np.linalg.norm(z)
    if nz <= t:
        return seg
    if nz <= -t:
        return np.zeros_like(seg)
    coef = 0.5 * (1.0 + t / nz)
    out = np.empty_like(seg)
    out[0] = coef * nz
    out[1:] = coef * z
    return out


_RS2 = np.sqrt(0.5)


def _project_rsoc(seg: np.ndarray) -> np.ndarray:
    # (a, b, z) with 2ab >= ||z||^2, a,b >= 0; rotate to SOC coordinates
    rot = seg.copy()
    a, b = seg[0], seg[1]
    rot[0] = _RS2 * (a + b)
    rot[1] = _RS2 * (a - b)
    rot = _project_soc(rot)
    out = rot.copy()
    out[0] = _RS2 * (rot[0] + rot[1])
    out[1] = _RS2 * (rot[0] - rot[1])
    return out


def _project_psd_svec(seg: np.ndarray) -> np.ndarray:
    m = smat(seg)
    w, v = np.linalg.eigh(m)
    if w[0] >= 0.0:
        return seg
    wc = np.maximum(w, 0.0)
    return svec((v * wc) @ v.T)


def _cone_plan(cones: ConeList):
    plan = []
    at = 0
    for kind, size in cones:
        rows = cone_rows(kind, size)
        plan.append((kind, at, at + rows))
        at += rows
    return plan


def _project_dual_cone(y: np.ndarray, plan) -> np.ndarray:
    """Project onto K*: zero segments become free, the rest are self-dual."""
    out = y.copy()
    for kind, lo, hi in plan:
        if kind == "zero":
            continue  # dual of {0} is everything
        if kind == "nonneg":
            np.maximum(out[lo:hi], 0.0, out=out[lo:hi])
        elif kind == "soc":
            out[lo:hi] = _project_soc(out[lo:hi])
        elif kind == "rsoc":
            out[lo:hi] = _project_rsoc(out[lo:hi])
        else:
            out[lo:hi] = _project_psd_svec(out[lo:hi])
    return out


def _project_primal_cone(s_vec: np.ndarray, plan) -> np.ndarray:
    out = s_vec.copy()
    for kind, lo, hi in plan:
        if kind == "zero":
            out[lo:hi] = 0.0
        elif kind == "nonneg":
            np.maximum(out[lo:hi], 0.0, out=out[lo:hi])
        elif kind == "soc":
            out[lo:hi] = _project_soc(out[lo:hi])
        elif kind == "rsoc":
            out[lo:hi] = _project_rsoc(out[lo:hi])
        else:
            out[lo:hi] = _project_psd_svec(out[lo:hi])
    return out


# --------------------------------------------------------- equilibration ----

def _row_abs_max(a) -> np.ndarray:
    if sp.issparse(a):
        r = np.zeros(a.shape[0])
        absa = abs(a).tocsr()
        mx = absa.max(axis=1).toarray().ravel()
        r[: mx.size] = mx
        return r
    return np.max(np.abs(a), axis=1) if a.size else np.zeros(a.shape[0])


def _col_abs_max(a) -> np.ndarray:
    if sp.issparse(a):
        return abs(a).max(axis=0).toarray().ravel()
    return np.max(np.abs(a), axis=0) if a.size else np.zeros(a.shape[1])


def _scale_rows_cols(a, dr: np.ndarray, dc: np.ndarray):
    if sp.issparse(a):
        return sp.diags(dr) @ a @ sp.diags(dc)
    return a * dr[:, None] * dc[None, :]


def _equilibrate(a, b, c, plan, passes: int = 10):
    """Ruiz equilibration; cone blocks share one row scale each."""
    m, n = a.shape
    d = np.ones(m)
    e = np.ones(n)
    work = a.copy()
    for _ in range(passes):
        r = _row_abs_max(work)
        for kind, lo, hi in plan:
            if kind in ("soc", "rsoc", "psd"):
                r[lo:hi] = np.max(r[lo:hi]) if hi > lo else 1.0
        r[r < 1e-12] = 1.0
        cmax = _col_abs_max(work)
        cmax[cmax < 1e-12] = 1.0
        dr = 1.0 / np.sqrt(r)
        dc = 1.0 / np.sqrt(cmax)
        work = _scale_rows_cols(work, dr, dc)
        d *= dr
        e *= dc
    b_s = d * b
    c_s = e * c
    nb, nc = np.linalg.norm(b_s), np.linalg.norm(c_s)
    sigma_b = 1.0 if nb < 1e-12 else 1.0 / nb
    sigma_c = 1.0 if nc < 1e-12 else 1.0 / nc
    return work, b_s * sigma_b, c_s * sigma_c, d, e, sigma_b, sigma_c


# ----------------------------------------------------------------- solve ----

def solve(prog: ConeProgram, tol: float = 1e-6, max_iter: int = 50000,
          warm: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
          alpha: float = 1.5, check_every: int = 25, rho_x: float = 1e-6,
          rho_y: float = 0.1) -> SolverResult:
    """Run the splitting iteration until all scaled residuals are <= tol.

    Douglas-Rachford on the homogeneous self-dual embedding under the block
    metric diag(rho_x I_n, rho_y I_m, 1).  `warm` is an optional (x, y, s)
    triple from a previous, nearby program.  Returns the best iterate found
    with status "max_iter" when the budget is exhausted; raises
    NumericalFailure on NaN.
    """
    m, n = prog.m, prog.n
    plan = _cone_plan(prog.cones)
    a_sc, b_sc, c_sc, d, e, sigma_b, sigma_c = _equilibrate(
        prog.A, prog.b, prog.c, plan)

    if sp.issparse(a_sc):
        a_sc = a_sc.tocsr()
        at_sc = a_sc.T.tocsr()
        gram0 = (at_sc @ a_sc).toarray()
    else:
        at_sc = a_sc.T
        gram0 = at_sc @ a_sc
    h_x, h_y = c_sc, b_sc

    state = {}

    def refactor():
        gram = gram0 / state["rho_y"] + rho_x * np.eye(n)
        # explicit inverse: SPD and well scaled; a GEMV per iteration beats
        # two triangular solves at these sizes
        state["minv"] = sla.cho_solve(sla.cho_factor(gram, check_finite=False),
                                      np.eye(n), check_finite=False)
        px, py = m_apply(h_x, h_y)
        state["p_x"], state["p_y"] = px, py
        state["denom"] = 1.0 + float(h_x @ px + h_y @ py)

    def m_apply(qx: np.ndarray, qy: np.ndarray):
        ax = state["minv"] @ (qx - at_sc @ qy / state["rho_y"])
        return ax, (qy + a_sc @ ax) / state["rho_y"]

    def lin_solve(rx, ry, rt):
        """(R + Q) z = r via block elimination and Sherman-Morrison."""
        qx = rx - rt * h_x
        qy = ry - rt * h_y
        tx, ty = m_apply(qx, qy)
        fac = (h_x @ tx + h_y @ ty) / state["denom"]
        zx = tx - fac * state["p_x"]
        zy = ty - fac * state["p_y"]
        zt = rt + float(h_x @ zx + h_y @ zy)
        return zx, zy, zt

    state["rho_y"] = rho_y
    refactor()

    # DR state w; fixed point has u = Pi_C(2z - w), v = R(w - u)
    if warm is not None:
        wx0, wy0, ws0 = warm
        ux = sigma_b * np.asarray(wx0, float) / e
        uy = sigma_c * np.asarray(wy0, float) * d
        vs = sigma_b * np.asarray(ws0, float) * d
        wx = ux.copy()
        wy = uy + vs / state["rho_y"]
        wt = 1.0
    else:
        wx, wy, wt = np.zeros(n), np.zeros(m), 1.0

    norm_b = np.linalg.norm(prog.b)
    norm_c = np.linalg.norm(prog.c)
    a_orig, at_orig = prog.A, (prog.A.T.tocsr() if sp.issparse(prog.A) else prog.A.T)

    def unscale(cand_x, cand_y, cand_s):
        return e * cand_x / sigma_b, d * cand_y / sigma_c, cand_s / d / sigma_b

    def dr_step(wx_, wy_, wt_):
        zx, zy, zt = lin_solve(rho_x * wx_, state["rho_y"] * wy_, wt_)
        ux_ = 2.0 * zx - wx_
        uy_ = _project_dual_cone(2.0 * zy - wy_, plan)
        ut_ = max(2.0 * zt - wt_, 0.0)
        gx = wx_ + alpha * (ux_ - zx)
        gy = wy_ + alpha * (uy_ - zy)
        gt = wt_ + alpha * (ut_ - zt)
        return (gx, gy, gt), (ux_, uy_, ut_)

    best = None
    status = "max_iter"
    it = 0
    cert_streak = 0
    ux = np.zeros(n); uy = np.zeros(m); ut = 1.0
    for it in range(1, max_iter + 1):
        (wx, wy, wt), (ux, uy, ut) = dr_step(wx, wy, wt)

        if it % check_every == 0 or it == max_iter:
            if not np.isfinite(ut) or not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
                raise NumericalFailure(
                    f"non-finite iterate at iteration {it}",
                    iterate={"u_x": ux, "u_y": uy, "tau": ut})
            scale_u = max(np.max(np.abs(ux), initial=0.0),
                          np.max(np.abs(uy), initial=0.0), 1e-30)
            vs = state["rho_y"] * (wy - uy)
            if ut > 1e-9 * scale_u:
                cx, cy, cs = unscale(ux / ut, uy / ut, vs / ut)
                cs = _project_primal_cone(cs, plan)
                pres = np.linalg.norm(a_orig @ cx + cs - prog.b) / (1.0 + norm_b)
                dres = np.linalg.norm(at_orig @ cy + prog.c) / (1.0 + norm_c)
                pobj = float(prog.c @ cx)
                dobj = float(prog.b @ cy)
                gap = abs(pobj + dobj) / (1.0 + abs(pobj) + abs(dobj))
                worst = max(pres, dres, gap)
                if best is None or worst < best[0]:
                    best = (worst, cx, cy, cs, pres, dres, gap, it)
                if worst <= tol:
                    status = "optimal"
                    break
            else:
                # tau collapsed: accept only a clean, persistent certificate
                y_cert = d * uy
                x_cert = e * ux
                s_cert = vs / d
                by = float(prog.b @ y_cert)
                cxv = float(prog.c @ x_cert)
                pinf = by < 0 and np.linalg.norm(at_orig @ y_cert) * max(norm_b, 1.0) \
                    <= tol * abs(by)
                dinf = cxv < 0 and np.linalg.norm(a_orig @ x_cert + s_cert) \
                    * max(norm_c, 1.0) <= tol * abs(cxv)
                cert_streak = cert_streak + 1 if (pinf or dinf) else 0
                if cert_streak >= 3 and it >= 1000:
                    status = "infeasible_suspected"
                    if best is None:
                        cx, cy, cs = unscale(ux, uy, vs)
                        best = (np.inf, cx, cy, cs, np.inf, np.inf, np.inf, it)
                    break

    if best is None:  # budget exhausted before any usable-tau check
        vs = state["rho_y"] * (wy - uy)
        tau = max(ut, 1e-30)
        cx, cy, cs = unscale(ux / tau, uy / tau, vs / tau)
        best = (np.inf, cx, cy, cs, np.inf, np.inf, np.inf, it)

    _, bx, by, bs, pres, dres, gap, _ = best
    return SolverResult(x=bx, y=by, s=bs, status=status,
                        primal_residual=float(pres), dual_residual=float(dres),
                        gap=float(gap), iterations=it,
                        objective=float(prog.c @ bx))


# ------------------------------------------------------------- utilities ----

def embed_hermitian(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]].

    PSD iff H is PSD; note the trace doubles (Tr_real = 2 Tr_complex), so
    trace-linear coefficients written against the embedding carry a 1/2.
    """
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-9 * scale:
        raise ConicError("embed_hermitian requires a Hermitian matrix")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def epigraph_log_cuts(c: float, grid: np.ndarray) -> list[tuple[float, float]]:
    """Tangent cuts t <= a_i mu + b_i of the concave t <= log2(1 + mu/c).

    Each cut over-estimates the function globally, so the cut set is a
    relaxation of the epigraph constraint, tight at the breakpoints.
    """
    if c <= 0:
        raise ValueError("epigraph_log_cuts requires c > 0")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size < 1:
        raise ValueError("need at least one breakpoint")
    cuts = []
    for mu in grid:
        a = 1.0 / (LN2 * (c + mu))
        b = float(np.log2(1.0 + mu / c)) - a * mu
        cuts.append((a, b))
    return cuts


def log_cut_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """Breakpoints with geometric spacing in (1 + mu), equalizing cut gaps."""
    if hi <= lo or count < 2:
        return np.array([max(lo, 0.0)])
    return np.geomspace(1.0 + lo, 1.0 + hi, count) - 1.0


def dump_program(prog: ConeProgram, path: str) -> None:
    """Plain-text dump (dense rows) for offline cross-checking."""
    a = prog.A.toarray() if sp.issparse(prog.A) else prog.A
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"rows {prog.m} cols {prog.n}\n")
        fh.write("cones " + " ".join(f"{k}:{s}" for k, s in prog.cones) + "\n")
        fh.write("c " + " ".join(f"{v:.17g}" for v in prog.c) + "\n")
        fh.write("b " + " ".join(f"{v:.17g}" for v in prog.b) + "\n")
        for i in range(prog.m):
            fh.write("A " + " ".join(f"{v:.17g}" for v in a[i]) + "\n")
