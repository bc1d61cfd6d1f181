"""Effective / cascaded channel construction and lifted matrix algebra.

Conventions.  A StarProfile stores the diagonal coefficients of the
transmission/reflection matrices directly, u_chi[m] = sqrt(beta) * e^{i
theta}, so Theta_chi = diag(u_chi).  The lifted forms work with the
conjugated vector (`lift_vector`), for which the cascades become plain
matrix products:

    h_{S,k}^H Theta_r f_BS = lift_r^H (diag(h_{S,k}^H) f_BS)

and the uplink cascade including the direct link reads utilde^H Q_k with
utilde = [lift_r; 1] and Q_k stacking diag(h_{S,k}^H) f_BS over g_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .channels import ChannelSet

Side = Literal["transmission", "reflection"]

_PSD_TOL = 1e-9


@dataclass
class StarProfile:
    """STAR-RIS coefficients; |u_t[m]|^2 + |u_r[m]|^2 = 1 per element."""

    u_t: np.ndarray
    u_r: np.ndarray

    def energy_violation(self) -> float:
        return float(np.max(np.abs(np.abs(self.u_t) ** 2 + np.abs(self.u_r) ** 2 - 1.0)))

    def validate(self, tol: float = 1e-6) -> None:
        if self.u_t.shape != self.u_r.shape or self.u_t.ndim != 1:
            raise ValueError("u_t and u_r must be 1-D arrays of equal length")
        if self.energy_violation() > tol:
            raise ValueError(
                f"per-element energy conservation violated by {self.energy_violation():.3e}")

    @staticmethod
    def even_split(m: int) -> "StarProfile":
        amp = np.sqrt(0.5)
        return StarProfile(u_t=amp * np.ones(m, dtype=complex),
                           u_r=amp * np.ones(m, dtype=complex))


@dataclass
class LiftedStar:
    """Lifted PSD forms: U_t (M x M) and U_r ((M+1) x (M+1)).

    The last row/column of U_r hosts the unit-modulus dummy scalar, so
    [U_r]_{M+1,M+1} = 1 and the element diagonals satisfy
    [U_t]_mm + [U_r]_mm = 1.
    """

    u_t_mat: np.ndarray
    u_r_mat: np.ndarray

    @property
    def m(self) -> int:
        return self.u_t_mat.shape[0]

    def diag_violation(self) -> float:
        m = self.m
        d = np.real(np.diag(self.u_t_mat) + np.diag(self.u_r_mat)[:m]) - 1.0
        dm = abs(np.real(self.u_r_mat[m, m]) - 1.0)
        return max(float(np.max(np.abs(d))), dm)

    def rank_one_violation(self) -> float:
        """max over both matrices of nuclear norm minus spectral norm."""
        return max(_nuclear_minus_spectral(self.u_t_mat),
                   _nuclear_minus_spectral(self.u_r_mat))

    def validate(self, tol: float = 1e-6) -> None:
        for name, u in (("U_t", self.u_t_mat), ("U_r", self.u_r_mat)):
            if not np.allclose(u, u.conj().T, atol=1e-8):
                raise ValueError(f"{name} is not Hermitian")
            if np.linalg.eigvalsh(u)[0] < -_PSD_TOL * max(1.0, np.linalg.norm(u)):
                raise ValueError(f"{name} is not PSD")
        if self.u_r_mat.shape[0] != self.m + 1:
            raise ValueError("U_r must be one dimension larger than U_t")
        if self.diag_violation() > tol:
            raise ValueError(f"diagonal constraints violated by {self.diag_violation():.3e}")

    @staticmethod
    def from_profile(profile: StarProfile) -> "LiftedStar":
        ut = lift_vector(profile, "transmission")
        ur = np.concatenate([lift_vector(profile, "reflection"), [1.0 + 0j]])
        return LiftedStar(u_t_mat=np.outer(ut, ut.conj()),
                          u_r_mat=np.outer(ur, ur.conj()))


def _nuclear_minus_spectral(u: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(u)
    return float(np.sum(np.abs(ev)) - np.max(np.abs(ev)))


@dataclass
class Beamformers:
    """Downlink transmit covariances / vectors and the uplink combiner.

    W         (J, N, N) Hermitian PSD transmit covariance per DL user
    w         (J, N) rank-one factors, when extracted
    z         (N,) receive combiner (None before the first receive update)
    z_multi   (K, N) per-user combiners, used only by the ZF baseline
    """

    W: np.ndarray
    w: np.ndarray | None = None
    z: np.ndarray | None = None
    z_multi: np.ndarray | None = None

    @property
    def total_power(self) -> float:
        return float(np.real(np.trace(self.W.sum(axis=0))))

    def validate(self, p_max: float, tol: float = 1e-6) -> None:
        if self.total_power > p_max + tol:
            raise ValueError(f"power budget exceeded: {self.total_power} > {p_max}")
        for j, wj in enumerate(self.W):
            if not np.allclose(wj, wj.conj().T, atol=1e-8):
                raise ValueError(f"W[{j}] is not Hermitian")
            if np.linalg.eigvalsh(wj)[0] < -_PSD_TOL * max(1.0, float(np.real(np.trace(wj)))):
                raise ValueError(f"W[{j}] is not PSD")

    @staticmethod
    def from_vectors(w: np.ndarray, z: np.ndarray | None = None) -> "Beamformers":
        W = np.einsum("ja,jb->jab", w, w.conj())
        return Beamformers(W=W, w=w.copy(), z=None if z is None else z.copy())


def theta_matrix(profile: StarProfile, side: Side) -> np.ndarray:
    """Diagonal transmission- or reflection-coefficient matrix."""
    u = profile.u_t if side == "transmission" else profile.u_r
    return np.diag(u)


def lift_vector(profile: StarProfile, side: Side) -> np.ndarray:
    """Conjugated coefficient vector used by all lifted forms."""
    u = profile.u_t if side == "transmission" else profile.u_r
    return u.conj()


def effective_ul_channel(chs: ChannelSet, profile: StarProfile, k: int) -> np.ndarray:
    """h_tilde_k = g_k + h_{S,k}^H Theta_r f_BS (length-N row)."""
    if not 0 <= k < chs.n_ul:
        raise IndexError(f"UL user index {k} out of range")
    return chs.g[k] + (chs.h_su_ul[k].conj() * profile.u_r) @ chs.f_bs


def effective_dl_channel(chs: ChannelSet, profile: StarProfile, j: int) -> np.ndarray:
    """h_tilde_j = h_{S,j}^H Theta_t f_BS (length-N row)."""
    if not 0 <= j < chs.n_dl:
        raise IndexError(f"DL user index {j} out of range")
    return (chs.h_su_dl[j].conj() * profile.u_t) @ chs.f_bs


def ul_to_dl_channel(chs: ChannelSet, profile: StarProfile, k: int, j: int) -> complex:
    """Scalar leakage channel h_{S,j}^H Theta_t h_{k,S}."""
    return complex((chs.h_su_dl[j].conj() * profile.u_t) @ chs.h_su_ul[k])


def lifted_ul_matrix(chs: ChannelSet, k: int) -> np.ndarray:
    """Q_k ((M+1) x N): diag(h_{S,k}^H) f_BS stacked over g_k."""
    top = chs.h_su_ul[k].conj()[:, None] * chs.f_bs
    return np.vstack([top, chs.g[k][None, :]])


def lifted_dl_matrices(chs: ChannelSet, j: int, k: int | None = None):
    """Lifted DL factors.

    Returns Q_j = diag(h_{S,j}^H) f_BS (M x N) and, when an UL index is
    given, Q_{k,j} = diag(h_{S,j}^H) h_{k,S} (length M), satisfying
    h^H Theta_t f = lift_t^H Q_j and h^H Theta_t h_{k,S} = lift_t^H Q_{k,j}.
    """
    hconj = chs.h_su_dl[j].conj()
    q_j = hconj[:, None] * chs.f_bs
    if k is None:
        return q_j
    q_kj = hconj * chs.h_su_ul[k]
    return q_j, q_kj


def trace_pair_identity(a: np.ndarray, b: np.ndarray) -> float:
    """Tr(AB) for Hermitian A, B via 1/4 (||A+B||_F^2 - ||A-B||_F^2)."""
    if a.shape != b.shape:
        raise ValueError("matrix size mismatch")
    return 0.25 * (np.linalg.norm(a + b, "fro") ** 2 - np.linalg.norm(a - b, "fro") ** 2)


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.abs(v) > 1e-12)
    if idx.size == 0:
        return v
    ph = v[idx[0]] / abs(v[idx[0]])
    return v * ph.conj()


@dataclass
class Extraction:
    vector: np.ndarray
    residual: float  # lambda_2 / lambda_1 of the input matrix


def extract_rank_one(
    u: np.ndarray,
    method: str = "principal",
    count: int = 100,
    rng: np.random.Generator | None = None,
    feasibility: str = "none",
    score: Callable[[np.ndarray], float] | None = None,
    diag_bound: np.ndarray | None = None,
) -> Extraction:
    """Recover a vector from a (near) rank-one Hermitian PSD matrix.

    principal:   sqrt(lambda_max) times the unit principal eigenvector.
    randomized:  `count` Gaussian samples shaped by U, each projected to the
                 feasible set, best sample by `score` (ties: lowest index).

    feasibility "star_diag" rescales each element so |v[m]|^2 does not
    exceed the bound (diag_bound, or diag(U) when omitted).  The returned
    residual is lambda_2 / lambda_1; it is 0 for an exactly rank-one input.
    """
    evals, evecs = np.linalg.eigh(u)
    lead = float(evals[-1])
    scale = max(1.0, float(np.sum(np.abs(evals))))
    if evals[0] < -1e-7 * scale:
        raise ValueError(f"matrix is not PSD: min eigenvalue {evals[0]:.3e}")
    residual = 0.0 if lead <= 0 else max(0.0, float(evals[-2])) / lead if len(evals) > 1 else 0.0

    def project(v: np.ndarray) -> np.ndarray:
        if feasibility == "none":
            return v
        if feasibility == "star_diag":
            bound = np.real(np.diag(u)) if diag_bound is None else diag_bound
            mag = np.abs(v)
            cap = np.sqrt(np.maximum(bound, 0.0))
            fac = np.where(mag > 1e-15, np.minimum(1.0, cap / np.maximum(mag, 1e-300)), 1.0)
            return v * fac
        raise ValueError(f"unknown feasibility rule: {feasibility!r}")

    if method == "principal":
        v = np.sqrt(max(lead, 0.0)) * evecs[:, -1]
        return Extraction(vector=_phase_normalize(project(v)), residual=residual)

    if method == "randomized":
        if rng is None:
            raise ValueError("randomized extraction needs an rng")
        if score is None:
            raise ValueError("randomized extraction needs a score callable")
        root = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0)))
        best_v, best_s = None, -np.inf
        for _ in range(count):
            gvec = (rng.standard_normal(u.shape[0])
                    + 1j * rng.standard_normal(u.shape[0])) / np.sqrt(2.0)
            v = project(root @ gvec)
            s = float(score(v))
            if s > best_s:  # strict: ties keep the lowest sample index
                best_v, best_s = v, s
        return Extraction(vector=_phase_normalize(best_v), residual=residual)

    raise ValueError(f"unknown extraction method: {method!r}")
