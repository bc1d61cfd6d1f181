"""Geometry and random channel generation.

Direct BS<->UL-user links are Rayleigh; every STAR-RIS assisted link is
Rician with a deterministic line-of-sight term built from half-wavelength
array steering vectors and the 3-D scenario geometry.  One matrix is stored
per physical link; the opposite propagation direction is its conjugate
transpose (channel reciprocity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


def path_loss(d: float, alpha: float, rho0: float) -> float:
    """Distance-dependent path loss rho0 * d**(-alpha) (linear power gain)."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if rho0 <= 0:
        raise ValueError(f"rho0 must be positive, got {rho0}")
    return rho0 * d ** (-alpha)


@dataclass
class UserPositions:
    ul: np.ndarray  # (K, 3)
    dl: np.ndarray  # (J, 3)


def _disk_points(center, radius, count, rng) -> np.ndarray:
    """Uniform points on a horizontal disk (z = center z)."""
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * np.pi * rng.random(count)
    pts = np.tile(np.asarray(center, dtype=float), (count, 1))
    pts[:, 0] += r * np.cos(phi)
    pts[:, 1] += r * np.sin(phi)
    return pts


def place_users(cfg: SystemConfig, rng: np.random.Generator) -> UserPositions:
    """Drop K UL users around the BS and J DL users around dl_center.

    Positions are uniform over the disk of radius cfg.user_radius; all user
    heights equal the respective region center's z-coordinate.
    """
    ul = _disk_points(cfg.bs_pos, cfg.user_radius, cfg.n_ul, rng)
    dl = _disk_points(cfg.dl_center, cfg.user_radius, cfg.n_dl, rng)
    return UserPositions(ul=ul, dl=dl)


@dataclass
class ChannelSet:
    """One realization of every channel in the model.

    g        (K, N)  BS <-> UL user direct rows (downstream direction g_k)
    f_bs     (M, N)  BS -> RIS
    h_su_ul  (K, M)  RIS <-> UL user k (stored as h_{S,k}, one row per user)
    h_su_dl  (J, M)  RIS <-> DL user j (stored as h_{S,j})
    h_si     (N, N)  BS self-interference
    """

    g: np.ndarray
    f_bs: np.ndarray
    h_su_ul: np.ndarray
    h_su_dl: np.ndarray
    h_si: np.ndarray

    @property
    def n_ul(self) -> int:
        return self.g.shape[0]

    @property
    def n_dl(self) -> int:
        return self.h_su_dl.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.g.shape[1] if self.g.size else self.f_bs.shape[1]

    @property
    def n_elements(self) -> int:
        return self.f_bs.shape[0]

    def validate(self) -> None:
        for name in ("g", "f_bs", "h_su_ul", "h_su_dl", "h_si"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr.view(float))):
                raise ValueError(f"non-finite entries in channel {name}")
        m, n = self.f_bs.shape
        if self.h_su_ul.shape[1] != m or self.h_su_dl.shape[1] != m:
            raise ValueError("RIS-side channel length mismatch")
        if self.g.shape[1] != n or self.h_si.shape != (n, n):
            raise ValueError("BS-side channel dimension mismatch")


def _grid_shape(m: int) -> tuple[int, int]:
    """Near-square factorization m = my * mz used for the planar array."""
    my = int(np.sqrt(m))
    while m % my:
        my -= 1
    return my, m // my


def upa_steering(m: int, direction: np.ndarray) -> np.ndarray:
    """Half-wavelength planar-array steering vector toward `direction`.

    The array lies in the y-z plane; `direction` is a unit vector from the
    array toward the far end of the link.
    """
    my, mz = _grid_shape(m)
    iy, iz = np.meshgrid(np.arange(my), np.arange(mz), indexing="ij")
    phase = np.pi * (iy * direction[1] + iz * direction[2])
    return np.exp(1j * phase).reshape(m)


def ula_steering(n: int, direction: np.ndarray) -> np.ndarray:
    """Half-wavelength linear-array steering vector (array along y)."""
    return np.exp(1j * np.pi * np.arange(n) * direction[1])


def _unit(vec: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(vec)
    if d <= 0:
        raise ValueError("zero-length link: endpoints coincide")
    return vec / d


def _cn(rng: np.random.Generator, *shape) -> np.ndarray:
    """i.i.d. circularly symmetric complex Gaussian, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(pl: float, kappa: float, los: np.ndarray, rng) -> np.ndarray:
    nlos = _cn(rng, *los.shape)
    if np.isinf(kappa):
        mix = los
    else:
        mix = np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * nlos
    return np.sqrt(pl) * mix


def generate_channels(cfg: SystemConfig, positions: UserPositions,
                      rng: np.random.Generator) -> ChannelSet:
    """Draw one ChannelSet for the given scenario and user drop."""
    bs = np.asarray(cfg.bs_pos)
    ris = np.asarray(cfg.ris_pos)
    n, m = cfg.n_antennas, cfg.n_elements
    k_users, j_users = positions.ul.shape[0], positions.dl.shape[0]

    # direct BS <-> UL links: Rayleigh
    g = np.zeros((k_users, n), dtype=complex)
    for k in range(k_users):
        d = np.linalg.norm(positions.ul[k] - bs)
        pl = path_loss(d, cfg.alpha_bu, cfg.rho0)
        g[k] = np.sqrt(pl) * _cn(rng, n)

    # BS -> RIS: Rician with a steering-vector outer-product LoS term
    d_bs_ris = np.linalg.norm(ris - bs)
    pl_f = path_loss(d_bs_ris, cfg.alpha_bs, cfg.rho0)
    los_f = np.outer(upa_steering(m, _unit(bs - ris)),
                     ula_steering(n, _unit(ris - bs)).conj())
    f_bs = _rician(pl_f, cfg.kappa_bs, los_f, rng)

    # RIS <-> user links: Rician, vector LoS toward each user
    def ris_user(pos_arr: np.ndarray) -> np.ndarray:
        out = np.zeros((pos_arr.shape[0], m), dtype=complex)
        for i, pos in enumerate(pos_arr):
            d = np.linalg.norm(pos - ris)
            pl = path_loss(d, cfg.alpha_su, cfg.rho0)
            out[i] = _rician(pl, cfg.kappa_su, upa_steering(m, _unit(pos - ris)), rng)
        return out

    h_su_ul = ris_user(positions.ul)
    h_su_dl = ris_user(positions.dl)

    # self-interference: unit-variance entries; the cancellation coefficient
    # rho_si scales the SI power inside the rate expressions, not here
    h_si = _cn(rng, n, n)

    chs = ChannelSet(g=g, f_bs=f_bs, h_su_ul=h_su_ul, h_su_dl=h_su_dl, h_si=h_si)
    chs.validate()
    return chs


def draw_instance(cfg: SystemConfig, seed: int | None = None):
    """Convenience: seeded user drop + channel draw.

    Returns (positions, channels).  Deterministic for a fixed (cfg, seed).
    """
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    positions = place_users(cfg, rng)
    return positions, generate_channels(cfg, positions, rng)
