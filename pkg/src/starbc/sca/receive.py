"""Closed-form receive beamforming at the FD base station.

The combiner maximizes the quotient z^H Upsilon Upsilon^H z / (z^H lam z)
with Upsilon = sum_k H_k wtilde and lam = H_SI W H_SI^H + sigma_B^2 I; the
maximizer is the principal generalized eigenvector of that pair.  When
Upsilon has a single column this reduces to lam^{-1} Upsilon up to scale.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..channels import ChannelSet
from ..lifting import Beamformers, StarProfile, effective_ul_channel


def _upsilon_si(chs: ChannelSet, profile: StarProfile, bf: Beamformers):
    n = chs.n_antennas
    if bf.w is not None:
        wtilde = bf.w.T                      # N x J
    else:
        from ..lifting import extract_rank_one
        wtilde = np.stack([extract_rank_one(wj).vector for wj in bf.W], axis=1)
    ups = np.zeros((n, wtilde.shape[1]), dtype=complex)
    for k in range(chs.n_ul):
        h = effective_ul_channel(chs, profile, k)
        ups += np.outer(h.conj(), h @ wtilde)     # H_k wtilde
    si = chs.h_si @ bf.W.sum(axis=0) @ chs.h_si.conj().T
    return ups, si


def receive_quotient(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
                     z: np.ndarray, sigma2_bs: float) -> float:
    """Gamma_B(z), the generalized Rayleigh quotient being maximized.

    The denominator z^H (SI + sigma^2 I) z is evaluated term by term: the
    noise floor sits ~14 orders below the SI quadratic form and would
    vanish in a pre-summed matrix.
    """
    ups, si = _upsilon_si(chs, profile, bf)
    num = float(np.real(z.conj() @ (ups @ (ups.conj().T @ z))))
    den = float(np.real(z.conj() @ si @ z)) \
        + sigma2_bs * float(np.real(z.conj() @ z))
    return num / den


def optimal_receive(chs: ChannelSet, profile: StarProfile, bf: Beamformers,
                    sigma2_bs: float) -> np.ndarray:
    """Unit-norm combiner maximizing Gamma_B (phase-normalized)."""
    if float(np.real(np.trace(bf.W.sum(axis=0)))) <= 0:
        raise ValueError("optimal_receive needs nonzero transmit power")
    ups, si = _upsilon_si(chs, profile, bf)
    # whiten via the SI spectrum with the noise power added analytically;
    # summing first would lose the noise floor to rounding
    d, v = np.linalg.eigh(si)
    d = np.maximum(d, 0.0) + sigma2_bs
    whiten = v * (1.0 / np.sqrt(d))
    g = whiten.conj().T @ (ups @ ups.conj().T) @ whiten
    _, u = np.linalg.eigh(0.5 * (g + g.conj().T))
    z = whiten @ u[:, -1]
    z = z / np.linalg.norm(z)
    idx = np.flatnonzero(np.abs(z) > 1e-12)
    if idx.size:
        ph = z[idx[0]] / abs(z[idx[0]])
        z = z * ph.conj()
    return z


def zf_combiners(chs: ChannelSet, profile: StarProfile) -> np.ndarray:
    """Per-user ZF directions: pseudo-inverse rows of the stacked effective
    uplink channels (least-squares when K > N), unit-normalized."""
    h_stack = np.array([effective_ul_channel(chs, profile, k)
                        for k in range(chs.n_ul)])      # K x N
    z = np.linalg.pinv(h_stack)                          # N x K
    z = z / np.maximum(np.linalg.norm(z, axis=0, keepdims=True), 1e-300)
    return z.T                                           # K x N, row per user
