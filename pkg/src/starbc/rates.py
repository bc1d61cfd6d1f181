"""Exact evaluation of rates, SINRs, interference and feasibility checks.

All rates are in bit/s/Hz (base-2 logs).  Functions take the transmit
covariances W_j; rank-one solutions enter as W_j = w_j w_j^H.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .config import SystemConfig
from .lifting import (Beamformers, StarProfile, effective_dl_channel,
                      effective_ul_channel)


@dataclass
class DecodingOrder:
    """Permutation of DL users; omega[j] is the decoding position of user j
    (0-based, lower positions decoded earlier)."""

    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=int)
        if sorted(self.omega.tolist()) != list(range(len(self.omega))):
            raise ValueError(f"omega must be a permutation of 0..J-1, got {self.omega}")

    @property
    def n(self) -> int:
        return len(self.omega)

    @staticmethod
    def identity(j: int) -> "DecodingOrder":
        return DecodingOrder(np.arange(j))

    @staticmethod
    def from_sequence(seq) -> "DecodingOrder":
        """Build from the user indices listed in decoding order."""
        seq = list(seq)
        omega = np.empty(len(seq), dtype=int)
        omega[seq] = np.arange(len(seq))
        return DecodingOrder(omega)

    def decoders_of(self, j: int) -> list[int]:
        """Users l with omega_l >= omega_j (those that decode j's signal)."""
        return [int(l) for l in range(self.n) if self.omega[l] >= self.omega[j]]

    def later_than(self, j: int) -> list[int]:
        """Users i with omega_i > omega_j (still-interfering signals)."""
        return [int(i) for i in range(self.n) if self.omega[i] > self.omega[j]]


@dataclass
class Flag:
    passed: bool
    violation: float


@dataclass
class RateReport:
    ul_sum_rate: float
    dl_rate: np.ndarray                 # per DL user, bit/s/Hz
    ul_to_dl_interference: np.ndarray   # per DL user, watts
    weighted_objective: float
    flags: dict[str, Flag] = field(default_factory=dict)

    @property
    def dl_sum_rate(self) -> float:
        return float(np.sum(self.dl_rate))

    @property
    def feasible(self) -> bool:
        return all(f.passed for f in self.flags.values())


def _ul_effective(chs: ChannelSet, profile: StarProfile) -> np.ndarray:
    return np.array([effective_ul_channel(chs, profile, k) for k in range(chs.n_ul)]) \
        if chs.n_ul else np.zeros((0, chs.n_antennas), dtype=complex)


def _dl_effective(chs: ChannelSet, profile: StarProfile) -> np.ndarray:
    return np.array([effective_dl_channel(chs, profile, j) for j in range(chs.n_dl)])


def ul_backscatter_powers(chs: ChannelSet, profile: StarProfile, W: np.ndarray) -> np.ndarray:
    """p_k = sum_j Tr(W_j H_k): power impinging on each backscatter user."""
    h_ul = _ul_effective(chs, profile)
    return np.array([float(np.real(h @ W.sum(axis=0) @ h.conj())) for h in h_ul])


def ul_sum_rate(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
                z: np.ndarray | None = None, rho_si: float = 0.0,
                sigma2_bs: float = 1.0) -> float:
    """NOMA uplink sum rate through the combiner z (trace form).

    log2(1 + [sum_kj |h_k z|^2 (h_k W_j h_k^H)] /
              [rho sum_j z^H H_SI W_j H_SI^H z + sigma_B^2 ||z||^2])
    """
    z = bf.z if z is None else z
    if z is None or not np.any(np.abs(z) > 0):
        raise ValueError("receive combiner z must be nonzero")
    h_ul = _ul_effective(chs, profile)
    sig = 0.0
    for h in h_ul:
        hz2 = abs(h @ z) ** 2
        sig += hz2 * sum(float(np.real(h @ wj @ h.conj())) for wj in bf.W)
    v = chs.h_si.conj().T @ z
    si = rho_si * sum(float(np.real(v.conj() @ wj @ v)) for wj in bf.W)
    den = si + sigma2_bs * float(np.real(z.conj() @ z))
    return float(np.log2(1.0 + sig / den))


def ul_to_dl_interference(chs: ChannelSet, profile: StarProfile,
                          bf: Beamformers, j: int) -> float:
    """Co-channel interference power at DL user j from all backscatter users."""
    if chs.n_ul == 0:
        return 0.0
    p = ul_backscatter_powers(chs, profile, bf.W)
    hconj = chs.h_su_dl[j].conj() * profile.u_t
    leak = np.abs(chs.h_su_ul @ hconj) ** 2   # |h_{S,j}^H Theta_t h_{k,S}|^2
    return float(np.sum(p * leak))


def dl_sinr(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
            order: DecodingOrder, l: int, j: int, sigma2_dl: float) -> float:
    """SINR at DL user l decoding user j's signal (requires omega_j <= omega_l)."""
    if order.omega[j] > order.omega[l]:
        raise ValueError(
            f"decoding l={l} -> j={j} undefined: omega_j={order.omega[j]} > omega_l={order.omega[l]}")
    h = effective_dl_channel(chs, profile, l)
    num = float(np.real(h @ bf.W[j] @ h.conj()))
    inter = sum(float(np.real(h @ bf.W[i] @ h.conj())) for i in order.later_than(j))
    den = ul_to_dl_interference(chs, profile, bf, l) + inter + sigma2_dl
    return num / den


def dl_sinr_sdma(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
                 j: int, sigma2_dl: float) -> float:
    """SINR at DL user j with no SIC: every other beam interferes."""
    h = effective_dl_channel(chs, profile, j)
    num = float(np.real(h @ bf.W[j] @ h.conj()))
    inter = sum(float(np.real(h @ bf.W[i] @ h.conj()))
                for i in range(chs.n_dl) if i != j)
    den = ul_to_dl_interference(chs, profile, bf, j) + inter + sigma2_dl
    return num / den


def ul_rate_zf(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
               z_multi: np.ndarray, rho_si: float, sigma2_bs: float) -> float:
    """Uplink sum rate with one linear combiner per user (ZF baseline).

    R = sum_k log2(1 + |h_k z_k|^2 p_k / (leakage_k + SI_k + noise_k)) with
    residual inter-user leakage kept in each denominator.
    """
    h_ul = _ul_effective(chs, profile)
    p = ul_backscatter_powers(chs, profile, bf.W)
    total = 0.0
    for k in range(chs.n_ul):
        zk = z_multi[k]
        sig = abs(h_ul[k] @ zk) ** 2 * p[k]
        leak = sum(abs(h_ul[kk] @ zk) ** 2 * p[kk]
                   for kk in range(chs.n_ul) if kk != k)
        v = chs.h_si.conj().T @ zk
        si = rho_si * sum(float(np.real(v.conj() @ wj @ v)) for wj in bf.W)
        den = leak + si + sigma2_bs * float(np.real(zk.conj() @ zk))
        total += float(np.log2(1.0 + sig / den))
    return total


def evaluate_solution(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
                      z: np.ndarray | None, order: DecodingOrder,
                      cfg: SystemConfig, dl_mode: str = "noma",
                      ul_mode: str = "noma") -> RateReport:
    """Full rate and feasibility report for one candidate solution.

    dl_rate[j] is min over all decoders l (omega_l >= omega_j) of the rate
    at which l decodes j, which operationalizes the SIC decodability
    condition.  Violations are reported via flags, never raised.
    """
    j_users = chs.n_dl
    h_dl = _dl_effective(chs, profile)

    if dl_mode == "noma":
        dl_rate = np.empty(j_users)
        for j in range(j_users):
            rates_lj = [np.log2(1.0 + dl_sinr(chs, profile, bf, order, l, j, cfg.sigma2_dl))
                        for l in order.decoders_of(j)]
            dl_rate[j] = min(rates_lj)
    elif dl_mode == "sdma":
        dl_rate = np.array([np.log2(1.0 + dl_sinr_sdma(chs, profile, bf, j, cfg.sigma2_dl))
                            for j in range(j_users)])
    else:
        raise ValueError(f"unknown dl_mode {dl_mode!r}")

    if chs.n_ul == 0:
        ul = 0.0
    elif ul_mode == "noma":
        ul = ul_sum_rate(chs, profile, bf, z, rho_si=cfg.rho_si, sigma2_bs=cfg.sigma2_bs)
    elif ul_mode == "zf":
        ul = ul_rate_zf(chs, profile, bf, bf.z_multi, cfg.rho_si, cfg.sigma2_bs)
    else:
        raise ValueError(f"unknown ul_mode {ul_mode!r}")

    interference = np.array([ul_to_dl_interference(chs, profile, bf, j)
                             for j in range(j_users)])

    flags: dict[str, Flag] = {}
    pv = max(0.0, bf.total_power - cfg.p_max)
    flags["power"] = Flag(pv <= 1e-6 * cfg.p_max, pv)

    if dl_mode == "noma":
        # pairwise power-order inequalities, all observer users i
        gains = np.array([[float(np.real(h_dl[i] @ bf.W[j] @ h_dl[i].conj()))
                           for j in range(j_users)] for i in range(j_users)])
        order_viol, scale = 0.0, float(np.max(gains)) if gains.size else 1.0
        for j in range(j_users):
            for l in range(j_users):
                if order.omega[j] < order.omega[l]:
                    order_viol = max(order_viol, float(np.max(gains[:, l] - gains[:, j])))
        flags["sic_power_order"] = Flag(order_viol <= 1e-5 * max(scale, 1e-300), order_viol)

        # consistency of the credited rates with every decoder's rate
        sic_viol = 0.0
        for j in range(j_users):
            for l in order.decoders_of(j):
                r_lj = np.log2(1.0 + dl_sinr(chs, profile, bf, order, l, j, cfg.sigma2_dl))
                sic_viol = max(sic_viol, dl_rate[j] - r_lj)
        flags["sic_rate"] = Flag(sic_viol <= 1e-9, sic_viol)
    else:
        flags["sic_power_order"] = Flag(True, 0.0)
        flags["sic_rate"] = Flag(True, 0.0)

    tv = float(np.max(cfg.r_bar - dl_rate)) if j_users else 0.0
    flags["target_rate"] = Flag(tv <= 1e-5, max(0.0, tv))

    ev = profile.energy_violation()
    flags["energy"] = Flag(ev <= 1e-6, ev)

    report = RateReport(
        ul_sum_rate=ul,
        dl_rate=dl_rate,
        ul_to_dl_interference=interference,
        weighted_objective=cfg.w_ul * ul + cfg.w_dl * float(np.sum(dl_rate)),
        flags=flags,
    )
    return report


def weighted_objective(report: RateReport, w_ul: float, w_dl: float) -> float:
    """w_ul * UL sum rate + w_dl * DL sum rate."""
    if w_ul < 0 or w_dl < 0:
        raise ValueError("weights must be nonnegative")
    return w_ul * report.ul_sum_rate + w_dl * report.dl_sum_rate
