"""Transmit covariance optimization at the FD BS (SCA over an SDP).

For fixed combiner(s) and STAR-RIS profile, each pass solves a conic
program: linear objective in the uplink and per-user downlink rate
variables; hyperbolic slack definitions as rotated second-order cones;
affine SCA rate bounds; the power, power-order and target-rate constraints;
and one PSD block per transmit covariance (rank-one dropped and verified
post hoc).  Downlink modes: "noma" (SIC with a decoding order) or "sdma";
uplink modes: "noma" (one combiner) or "zf" (one combiner per UL user).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channels import ChannelSet
from ..config import SystemConfig
from ..lifting import (Beamformers, StarProfile, effective_dl_channel,
                       effective_ul_channel, extract_rank_one, ul_to_dl_channel)
from .bounds import LN2
from .builder import ProgramBuilder, const_expr


class WarmPointInfeasible(ValueError):
    pass


class SubproblemFailure(RuntimeError):
    pass


@dataclass
class TransmitInfo:
    passes: int = 0
    objective_trace: list = field(default_factory=list)
    eig_ratios: np.ndarray | None = None
    solver_iterations: int = 0
    solver_failures: int = 0
    residual_trace: list = field(default_factory=list)


def _pair_set(order, j_users: int, dl_mode: str):
    if dl_mode == "sdma":
        return [(j, j) for j in range(j_users)]
    return [(l, j) for j in range(j_users) for l in range(j_users)
            if order.omega[l] >= order.omega[j]]


def _interferers(order, j: int, j_users: int, dl_mode: str):
    if dl_mode == "sdma":
        return [i for i in range(j_users) if i != j]
    return order.later_than(j)


def _normalize(expr):
    """Rescale a one-dimensional cone row to unit peak coefficient."""
    peak = max([np.max(np.abs(v)) for v in expr.coeffs.values()] + [abs(expr.const)])
    return expr * (1.0 / peak) if peak > 0 else expr


def solve_transmit(chs: ChannelSet, profile: StarProfile, z, order,
                   cfg: SystemConfig, warm: Beamformers,
                   dl_mode: str = "noma", ul_mode: str = "noma",
                   max_passes: int = 30, tol: float = 1e-5) -> tuple[Beamformers, TransmitInfo]:
    """SCA loop for the transmit covariances, warm-started at `warm`.

    `z` is the combiner (N,) for ul_mode "noma" or the per-user stack
    (K, N) for "zf".  Raises WarmPointInfeasible naming the violated
    constraint when the warm point breaks the hard constraints.
    """
    j_users, k_users, n = chs.n_dl, chs.n_ul, chs.n_antennas
    p_max = cfg.p_max
    pairs = _pair_set(order, j_users, dl_mode)
    use_ul = k_users > 0

    h_dl = np.array([effective_dl_channel(chs, profile, l) for l in range(j_users)])
    h_ul = np.array([effective_ul_channel(chs, profile, k) for k in range(k_users)]) \
        if use_ul else np.zeros((0, n), complex)
    H_dl = [np.outer(h.conj(), h) for h in h_dl]
    H_ul = [np.outer(h.conj(), h) for h in h_ul]
    # per-DL-user UL interference coupling: C_l = sum_k |hkl|^2 H_k
    leak = np.array([[abs(ul_to_dl_channel(chs, profile, k, l)) ** 2
                      for k in range(k_users)] for l in range(j_users)]) \
        if use_ul else np.zeros((j_users, 0))
    C_leak = [sum(leak[l, k] * H_ul[k] for k in range(k_users)) if use_ul else None
              for l in range(j_users)]

    if ul_mode == "noma" and use_ul:
        z = np.asarray(z)
        zs = [z]
        C_sig = [sum(abs(h @ z) ** 2 * Hk for h, Hk in zip(h_ul, H_ul))]
        v_si = [chs.h_si.conj().T @ z]
        noise_z = [cfg.sigma2_bs * float(np.real(z.conj() @ z))]
    elif ul_mode == "zf" and use_ul:
        zs = [np.asarray(z)[k] for k in range(k_users)]
        C_sig = [abs(h_ul[k] @ zs[k]) ** 2 * H_ul[k] for k in range(k_users)]
        # residual inter-user leakage into combiner k
        C_zleak = [sum(abs(h_ul[kk] @ zs[k]) ** 2 * H_ul[kk]
                       for kk in range(k_users) if kk != k) if k_users > 1 else None
                   for k in range(k_users)]
        v_si = [chs.h_si.conj().T @ zk for zk in zs]
        noise_z = [cfg.sigma2_bs * float(np.real(zk.conj() @ zk)) for zk in zs]
    else:
        zs, C_sig, v_si, noise_z = [], [], [], []
    n_ul_terms = len(C_sig)

    def tr(mat: np.ndarray, w: np.ndarray) -> float:
        return float(np.real(np.trace(mat @ w)))

    floor = 1e-14 * max(p_max * max((np.linalg.norm(h) ** 2 for h in h_dl)), 1e-300)

    def expansion_points(W: np.ndarray):
        """Slack local points from the defining equalities at W."""
        s0 = {}
        i0 = {}
        for (l, j) in pairs:
            s0[(l, j)] = 1.0 / max(tr(H_dl[l], W[j]), floor)
            inter = sum(tr(H_dl[l], W[i]) for i in _interferers(order, j, j_users, dl_mode))
            ul_i = float(leak[l] @ [sum(tr(H_ul[k], W[jj]) for jj in range(j_users))
                                    for k in range(k_users)]) if use_ul else 0.0
            i0[(l, j)] = ul_i + inter + cfg.sigma2_dl
        t0, d0 = [], []
        for t in range(n_ul_terms):
            sig = sum(tr(C_sig[t], W[j]) for j in range(j_users))
            t0.append(1.0 / max(sig, floor))
            den = cfg.rho_si * sum(float(np.real(v_si[t].conj() @ W[j] @ v_si[t]))
                                   for j in range(j_users)) + noise_z[t]
            if ul_mode == "zf" and k_users > 1:
                den += sum(tr(C_zleak[t], W[j]) for j in range(j_users))
            d0.append(den)
        return s0, i0, t0, d0

    def check_warm(W: np.ndarray):
        power = sum(tr(np.eye(n), wj) for wj in W)
        if power > p_max * (1 + 1e-4):
            raise WarmPointInfeasible(f"warm point violates the power budget: {power:.4g} W")
        if dl_mode == "noma":
            gains = np.array([[tr(H_dl[i], W[j]) for j in range(j_users)]
                              for i in range(j_users)])
            scale = max(float(np.max(gains)), 1e-300)
            for j in range(j_users):
                for l in range(j_users):
                    if order.omega[j] < order.omega[l] and \
                            np.any(gains[:, l] - gains[:, j] > 1e-4 * scale):
                        raise WarmPointInfeasible(
                            f"warm point violates the power-order constraint for pair ({j},{l})")
        s0, i0, _, _ = expansion_points(W)
        for j in range(j_users):
            r_j = min(np.log2(1.0 + 1.0 / (s0[(l, jj)] * i0[(l, jj)]))
                      for (l, jj) in pairs if jj == j)
            if r_j < cfg.r_bar - 1e-4 * max(1.0, cfg.r_bar):
                raise WarmPointInfeasible(
                    f"warm point violates the target rate for DL user {j}: {r_j:.4g}")

    W = warm.W.copy()
    check_warm(W)
    s0, i0, t0, d0 = expansion_points(W)

    info = TransmitInfo()
    warm_triplet = None
    prev_val = None
    for sweep in range(max_passes):
        bld = ProgramBuilder()
        Wv = [bld.hermitian(f"W{j}", n) for j in range(j_users)]
        r_dl = [bld.scalar(f"rdl{j}").expr() for j in range(j_users)]
        sv = {p: bld.scalar(f"s{p[0]}_{p[1]}").expr() for p in pairs}
        iv = {p: bld.scalar(f"i{p[0]}_{p[1]}").expr() for p in pairs}
        tv = [bld.scalar(f"tau{t}").expr() for t in range(n_ul_terms)]
        dv = [bld.scalar(f"delta{t}").expr() for t in range(n_ul_terms)]
        r_ul = [bld.scalar(f"rul{t}").expr() for t in range(n_ul_terms)]

        def wtrace(mat: np.ndarray, j: int):
            return Wv[j].trace(mat * p_max)   # variables are W / p_max

        # power budget and PSD blocks
        bld.add_nonneg(const_expr(1.0) - sum((Wv[j].trace(np.eye(n)) for j in range(j_users)),
                                             const_expr(0.0)))
        # power-order constraints (NOMA only)
        if dl_mode == "noma":
            for j in range(j_users):
                for l in range(j_users):
                    if order.omega[j] < order.omega[l]:
                        for i in range(j_users):
                            bld.add_nonneg(_normalize(wtrace(H_dl[i], j) - wtrace(H_dl[i], l)))

        for (l, j) in pairs:
            st, it_ = s0[(l, j)], i0[(l, j)]
            # 1/S <= Tr(W_j H_l): ratio-scaled hyperbolic cone
            bld.add_rsoc(sv[(l, j)], wtrace(H_dl[l] * st, j), [const_expr(np.sqrt(2.0))])
            # interference slack definition
            rhs = const_expr(cfg.sigma2_dl / it_)
            for i in _interferers(order, j, j_users, dl_mode):
                rhs = rhs + wtrace(H_dl[l] / it_, i)
            if use_ul:
                for jj in range(j_users):
                    rhs = rhs + wtrace(C_leak[l] / it_, jj)
            bld.add_nonneg(iv[(l, j)] - rhs)
            # SCA rate bound, exact at (s0, i0)
            coef = 1.0 / (LN2 * (st * it_ + 1.0))
            bound = const_expr(np.log2(1.0 + 1.0 / (st * it_))) \
                + (const_expr(1.0) - sv[(l, j)]) * coef \
                + (const_expr(1.0) - iv[(l, j)]) * coef
            bld.add_nonneg(bound - r_dl[j])

        for j in range(j_users):
            bld.add_nonneg(r_dl[j] - cfg.r_bar)

        for t in range(n_ul_terms):
            sig = sum((wtrace(C_sig[t] * t0[t], j) for j in range(j_users)), const_expr(0.0))
            bld.add_rsoc(tv[t], sig, [const_expr(np.sqrt(2.0))])
            den = const_expr(noise_z[t] / d0[t])
            for j in range(j_users):
                c_si = cfg.rho_si * np.outer(v_si[t], v_si[t].conj()) / d0[t]
                den = den + wtrace(c_si, j)
                if ul_mode == "zf" and k_users > 1:
                    den = den + wtrace(C_zleak[t] / d0[t], j)
            bld.add_nonneg(dv[t] - den)
            coef = 1.0 / (LN2 * (t0[t] * d0[t] + 1.0))
            bound = const_expr(np.log2(1.0 + 1.0 / (t0[t] * d0[t]))) \
                + (const_expr(1.0) - tv[t]) * coef + (const_expr(1.0) - dv[t]) * coef
            bld.add_nonneg(bound - r_ul[t])

        objective = sum(r_dl, const_expr(0.0)) * cfg.w_dl \
            + sum(r_ul, const_expr(0.0)) * cfg.w_ul
        bld.minimize(-objective)

        built = bld.build()
        sol = built.solve(tol=tol, max_iter=50000, warm=warm_triplet)
        if sol.status != "optimal":
            if sol.result.max_residual > 50 * tol:
                sol = built.solve(tol=tol * 10, max_iter=100000)
            if sol.status != "optimal" and sol.result.max_residual > 1e-3:
                # persistent stall: keep the current iterate and stop the
                # SCA loop (the caller's accept guard handles the rest)
                info.solver_failures += 1
                break
        warm_triplet = sol.warm_triplet()
        info.solver_iterations += sol.result.iterations
        info.residual_trace.append(sol.result.max_residual)

        W_new = np.stack([p_max * sol.hermitian(f"W{j}") for j in range(j_users)])
        total = sum(float(np.real(np.trace(wj))) for wj in W_new)
        if total > p_max:
            W_new *= p_max / total
        W = W_new
        s0, i0, t0, d0 = expansion_points(W)

        val = -sol.objective
        info.passes = sweep + 1
        info.objective_trace.append(val)
        if prev_val is not None and abs(val - prev_val) <= cfg.eps_converge * max(1.0, abs(val)):
            break
        prev_val = val

    extracted = [extract_rank_one(wj) for wj in W]
    info.eig_ratios = np.array([
        0.0 if float(np.linalg.eigvalsh(wj)[-1]) <= 1e-4 * p_max else e.residual
        for e, wj in zip(extracted, W)])   # noise-floor beams count as rank 0
    w_vecs = np.stack([e.vector for e in extracted])
    return Beamformers(W=W, w=w_vecs, z=warm.z, z_multi=warm.z_multi), info
