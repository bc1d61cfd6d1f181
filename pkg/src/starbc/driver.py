"""Alternating-optimization orchestration, initialization and baselines.

One AO iteration runs {transmit SDP -> closed-form receive -> penalty-based
passive beamforming}, evaluating the true weighted sum rate (rates module)
after each block.  A block's proposal is kept only if it does not decrease
the true objective: the receive update maximizes a quotient proxy and the
passive extraction is lossy at the violation tolerance, so occasional
non-improving proposals are expected and rejected rather than let them
break monotonicity.  A transmit proposal that decreases the objective
beyond tolerance indicates a bug and aborts.

Schemes: "proposed" (STAR-RIS, NOMA both links), "cr_noma" (conventional
RIS amplitude masks), "sr_noma_sdma" (no DL SIC), "sr_zf_noma" (per-user ZF
uplink combiners).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .config import SystemConfig
from .lifting import (Beamformers, LiftedStar, StarProfile,
                      effective_dl_channel, lifted_dl_matrices,
                      lifted_ul_matrix)
from .rates import DecodingOrder, RateReport, evaluate_solution
from .sca.ordering import decoding_order
from .sca.passive import solve_passive
from .sca.receive import optimal_receive, zf_combiners
from .sca.transmit import WarmPointInfeasible, solve_transmit

SCHEMES = ("proposed", "cr_noma", "sr_noma_sdma", "sr_zf_noma")


class InfeasibleAtInit(RuntimeError):
    pass


class MonotonicityError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class Solution:
    scheme: str
    beamformers: Beamformers
    profile: StarProfile
    lifted: LiftedStar | None
    order: DecodingOrder
    report: RateReport
    objective_trace: list[float] = field(default_factory=list)  # per AO iter
    block_trace: list[float] = field(default_factory=list)      # per block
    ao_iterations: int = 0
    penalty_outer: int = 0
    penalty_inner: int = 0
    wallclock_s: float = 0.0
    w_eig_ratios: np.ndarray | None = None
    passive_violation: float = 0.0
    rejected_blocks: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.report.weighted_objective


def _scheme_modes(scheme: str) -> tuple[str, str]:
    if scheme in ("proposed", "cr_noma"):
        return "noma", "noma"
    if scheme == "sr_noma_sdma":
        return "sdma", "noma"
    if scheme == "sr_zf_noma":
        return "noma", "zf"
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def cr_masks(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Conventional-RIS amplitude masks: first half transmits, rest reflects."""
    mask_t = np.zeros(m)
    mask_t[: m // 2] = 1.0
    return mask_t, 1.0 - mask_t


def _aligned_profile(chs: ChannelSet, beta_t: np.ndarray, beta_r: np.ndarray,
                     extra_phase: np.ndarray | None = None) -> StarProfile:
    """Amplitudes as given, phases aligned to the strongest cascaded paths
    (DL user 1 on the transmission side, UL user 1 on the reflection side)."""
    m = chs.n_elements
    q_t = lifted_dl_matrices(chs, 0)
    _, _, vh = np.linalg.svd(q_t)
    c_t = q_t @ vh[0].conj()
    phase_t = np.angle(c_t)
    q_r = lifted_ul_matrix(chs, 0)
    _, _, vh = np.linalg.svd(q_r)
    c_r = q_r @ vh[0].conj()
    phase_r = np.angle(c_r[:m]) - np.angle(c_r[m]) if abs(c_r[m]) > 1e-12 \
        else np.angle(c_r[:m])
    if extra_phase is not None:
        phase_t = phase_t + extra_phase
        phase_r = phase_r - extra_phase
    lift_t = np.sqrt(beta_t) * np.exp(1j * phase_t)
    lift_r = np.sqrt(beta_r) * np.exp(1j * phase_r)
    return StarProfile(u_t=lift_t.conj(), u_r=lift_r.conj())


def _beams_feasible(chs, profile, bf, order, cfg, dl_mode) -> bool:
    rep = evaluate_solution(chs, profile, bf, bf.z, order, cfg,
                            dl_mode=dl_mode,
                            ul_mode="noma" if bf.z_multi is None else "zf")
    keys = ["power", "target_rate"] + (["sic_power_order"] if dl_mode == "noma" else [])
    return all(rep.flags[k].passed for k in keys)


def _mrt_beams(chs, profile, cfg) -> np.ndarray:
    j_users = chs.n_dl
    w = np.zeros((j_users, chs.n_antennas), dtype=complex)
    for j in range(j_users):
        h = effective_dl_channel(chs, profile, j)
        w[j] = np.sqrt(cfg.p_max / j_users) * h.conj() / max(np.linalg.norm(h), 1e-300)
    return w


def _aligned_beams(chs, profile, cfg, order, dl_mode) -> np.ndarray:
    """Single-direction superposition with descending powers: always
    satisfies the power-order constraints for the given order."""
    j_users = chs.n_dl
    h = np.array([effective_dl_channel(chs, profile, j) for j in range(j_users)])
    cov = sum(np.outer(hh.conj(), hh) for hh in h)
    v = np.linalg.eigh(cov)[1][:, -1]
    ranks = order.omega if dl_mode == "noma" else np.zeros(j_users, dtype=int)
    shares = 0.5 ** np.asarray(ranks, dtype=float)
    shares = shares / shares.sum() * cfg.p_max
    return np.stack([np.sqrt(p) * v for p in shares])


def initialize(chs: ChannelSet, cfg: SystemConfig, order: DecodingOrder,
               scheme: str = "proposed", max_redraws: int = 5
               ) -> tuple[Beamformers, LiftedStar, StarProfile]:
    """Feasible starting point: half-split (or masked) aligned profile, MRT
    or aligned-superposition beams, and the closed-form combiner."""
    dl_mode, ul_mode = _scheme_modes(scheme)
    m = chs.n_elements
    if scheme == "cr_noma":
        beta_t, beta_r = cr_masks(m)
    else:
        beta_t = beta_r = 0.5 * np.ones(m)
    rng = np.random.default_rng(cfg.rng_seed + 0x5EED)

    extra = None
    for attempt in range(max_redraws + 1):
        profile = _aligned_profile(chs, beta_t, beta_r, extra)
        candidates = [_mrt_beams(chs, profile, cfg)]
        if dl_mode == "noma":
            candidates.append(_aligned_beams(chs, profile, cfg, order, dl_mode))
        else:
            candidates.append(_aligned_beams(chs, profile, cfg, order, dl_mode))
        for w in candidates:
            bf = Beamformers.from_vectors(w)
            if ul_mode == "zf" and chs.n_ul:
                bf.z_multi = zf_combiners(chs, profile)
                bf.z = bf.z_multi[0]
            elif chs.n_ul:
                bf.z = optimal_receive(chs, profile, bf, cfg.sigma2_bs)
            else:
                bf.z = np.ones(chs.n_antennas, dtype=complex) / np.sqrt(chs.n_antennas)
            if _beams_feasible(chs, profile, bf, order, cfg, dl_mode):
                lifted = LiftedStar.from_profile(profile)
                return bf, lifted, profile
        extra = rng.uniform(0.0, 2.0 * np.pi, m)
    raise InfeasibleAtInit(
        f"no feasible initialization after {max_redraws} phase redraws "
        f"(scheme={scheme}, seed={cfg.rng_seed})")


def run_ao(chs: ChannelSet, cfg: SystemConfig, order: DecodingOrder,
           scheme: str = "proposed") -> Solution:
    """Alternating optimization until the true objective stalls."""
    t_start = time.perf_counter()
    dl_mode, ul_mode = _scheme_modes(scheme)
    masks = cr_masks(chs.n_elements) if scheme == "cr_noma" else None

    bf, lifted, profile = initialize(chs, cfg, order, scheme)

    def evaluate(bf_, profile_):
        return evaluate_solution(chs, profile_, bf_, bf_.z, order, cfg,
                                 dl_mode=dl_mode, ul_mode=ul_mode)

    report = evaluate(bf, profile)
    obj = report.weighted_objective
    sol = Solution(scheme=scheme, beamformers=bf, profile=profile,
                   lifted=lifted, order=order, report=report,
                   objective_trace=[obj], block_trace=[obj])
    passive_warm_state = None

    for it in range(cfg.max_ao_iters):
        sol.ao_iterations = it + 1
        # --- transmit block ---
        # The previous passive extraction can leave the current covariances
        # marginally outside the power-order constraints under the new
        # profile; the transmit solve then restores exact feasibility at a
        # real rate cost.  Such proposals (and outright-infeasible warm
        # points after the first iteration) are rejected, which keeps the
        # objective trace non-decreasing by construction.
        z_arg = bf.z_multi if ul_mode == "zf" else bf.z
        try:
            bf_new, tinfo = solve_transmit(chs, profile, z_arg, order, cfg, bf,
                                           dl_mode=dl_mode, ul_mode=ul_mode)
        except WarmPointInfeasible:
            if it == 0:
                raise
            bf_new, tinfo = None, None
        if bf_new is not None:
            rep_new = evaluate(bf_new, profile)
            if rep_new.weighted_objective >= obj:
                bf, report, obj = bf_new, rep_new, rep_new.weighted_objective
                sol.w_eig_ratios = tinfo.eig_ratios
            else:
                sol.rejected_blocks += 1
        else:
            sol.rejected_blocks += 1
        sol.block_trace.append(obj)

        # --- receive block ---
        if chs.n_ul:
            bf_cand = Beamformers(W=bf.W, w=bf.w, z=bf.z, z_multi=bf.z_multi)
            if ul_mode == "zf":
                bf_cand.z_multi = zf_combiners(chs, profile)
                bf_cand.z = bf_cand.z_multi[0]
            else:
                bf_cand.z = optimal_receive(chs, profile, bf, cfg.sigma2_bs)
            rep_new = evaluate(bf_cand, profile)
            if rep_new.weighted_objective >= obj:
                bf, report, obj = bf_cand, rep_new, rep_new.weighted_objective
            else:
                sol.rejected_blocks += 1
        sol.block_trace.append(obj)

        # --- passive block ---
        z_arg = bf.z_multi if ul_mode == "zf" else bf.z
        # larger lifted blocks need a larger splitting budget per solve
        budget = int(12000 * max(1.0, (chs.n_elements / 20.0) ** 1.5))
        pres = solve_passive(chs, bf, z_arg, order, cfg, lifted,
                             dl_mode=dl_mode, ul_mode=ul_mode, masks=masks,
                             warm_state=passive_warm_state,
                             max_solver_iter=budget)
        passive_warm_state = pres.info.warm_state
        sol.penalty_outer += pres.info.outer_rounds
        sol.penalty_inner += pres.info.inner_passes
        bf_cand = Beamformers(W=bf.W, w=bf.w, z=bf.z, z_multi=bf.z_multi)
        if ul_mode == "zf" and chs.n_ul:
            bf_cand.z_multi = zf_combiners(chs, pres.profile)
            bf_cand.z = bf_cand.z_multi[0]
        rep_new = evaluate(bf_cand, pres.profile)
        if rep_new.weighted_objective >= obj and \
                pres.info.violation <= cfg.eps_violation:
            profile = pres.profile
            # keep the AO state exactly rank-one: warm the next passive call
            # with the lift of the extracted profile, not the solver iterate
            lifted = LiftedStar.from_profile(profile)
            bf, report, obj = bf_cand, rep_new, rep_new.weighted_objective
            sol.passive_violation = pres.info.violation
        else:
            sol.rejected_blocks += 1
        sol.block_trace.append(obj)

        sol.objective_trace.append(obj)
        prev = sol.objective_trace[-2]
        if abs(obj - prev) <= cfg.eps_converge * max(1.0, abs(prev)):
            break

    # final consistency: the block trace must be non-decreasing
    trace = np.asarray(sol.block_trace)
    if np.any(np.diff(trace) < -1e-4 * np.maximum(1.0, np.abs(trace[:-1]))):
        raise MonotonicityError("objective trace decreased beyond tolerance", trace)

    sol.beamformers = bf
    sol.profile = profile
    sol.lifted = lifted
    sol.report = report
    sol.wallclock_s = time.perf_counter() - t_start
    return sol


def run_baseline(scheme: str, chs: ChannelSet, cfg: SystemConfig,
                 order: DecodingOrder) -> Solution:
    """Run one of the comparison schemes through the same AO pipeline."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    sol = run_ao(chs, cfg, order, scheme=scheme)
    if scheme == "sr_zf_noma" and chs.n_ul > chs.n_antennas:
        sol.notes["zf_least_squares"] = (
            "K > N: zero-forcing is undefined, least-squares combiners used")
    return sol


def heuristic_order(chs: ChannelSet, cfg: SystemConfig) -> DecodingOrder:
    order, _ = decoding_order(chs, cfg)
    return order


def exhaustive_order(chs: ChannelSet, cfg: SystemConfig,
                     scheme: str = "proposed"):
    """Run the full AO for every decoding order (guarded to J <= 4).

    Returns (best order, {order tuple -> objective}).
    """
    j_users = chs.n_dl
    if j_users > 4:
        raise ValueError(f"exhaustive search refused for J={j_users} > 4")
    table: dict[tuple[int, ...], float] = {}
    best, best_obj = None, -np.inf
    for perm in itertools.permutations(range(j_users)):
        order = DecodingOrder.from_sequence(list(perm))
        sol = run_ao(chs, cfg, order, scheme=scheme)
        table[perm] = sol.objective
        if sol.objective > best_obj:
            best, best_obj = order, sol.objective
    return best, table
