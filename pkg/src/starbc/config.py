"""Scenario configuration.

All powers are stored in watts and all gains/factors in linear scale; any
dB/dBm quantity is converted once, at config-parse time.  Defaults follow the
simulated setup: a 3-antenna full-duplex base station at the origin, a 20
element STAR-RIS at (3, 0, 0) m, uplink backscatter users around the BS and
downlink users around (20, 0, 0) m.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace


def db_to_linear(x_db: float) -> float:
    """dB -> linear power ratio."""
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    """dBm -> watts."""
    return 10.0 ** (x_dbm / 10.0) * 1e-3


@dataclass
class SystemConfig:
    # array / user counts
    n_antennas: int = 3          # N, FD BS antennas
    n_elements: int = 20         # M, STAR-RIS elements
    n_ul: int = 4                # K, uplink backscatter users
    n_dl: int = 4                # J, downlink users

    # powers and targets
    p_max: float = 5.0           # W, BS transmit power budget
    r_bar: float = 0.1           # bit/s/Hz, per-DL-user target rate
    w_ul: float = 1.0            # uplink weight in the objective
    w_dl: float = 1.0            # downlink weight in the objective
    sigma2_dl: float = dbm_to_watts(-110.0)   # W, DL receiver noise
    sigma2_bs: float = dbm_to_watts(-110.0)   # W, BS receiver noise
    rho_si: float = db_to_linear(-100.0)      # residual SI coefficient

    # large-scale fading
    rho0: float = db_to_linear(-30.0)   # path loss at 1 m
    alpha_bu: float = 3.5               # BS <-> UL user exponent (direct)
    alpha_bs: float = 2.2               # BS <-> RIS exponent
    alpha_su: float = 2.2               # RIS <-> user exponent
    kappa_bs: float = db_to_linear(3.0)  # Rician factor, BS-RIS link
    kappa_su: float = db_to_linear(3.0)  # Rician factor, RIS-user links

    # geometry (meters)
    bs_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ris_pos: tuple[float, float, float] = (3.0, 0.0, 0.0)
    dl_center: tuple[float, float, float] = (20.0, 0.0, 0.0)
    user_radius: float = 2.0

    # algorithm parameters
    eta_penalty0: float = 1e-4   # initial penalty factor
    penalty_decay_c: float = 0.5  # geometric decay of the penalty factor
    eps_converge: float = 1e-3   # fractional-change convergence threshold
    eps_violation: float = 1e-7  # rank-one violation threshold
    r_max_inner: int = 30        # inner iteration cap of the penalty loop
    max_ao_iters: int = 50       # outer alternating-optimization cap

    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if min(self.n_antennas, self.n_elements, self.n_ul, self.n_dl) < 1:
            raise ValueError("antenna/element/user counts must all be >= 1")
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if self.r_bar < 0:
            raise ValueError("r_bar must be nonnegative")
        if self.w_ul < 0 or self.w_dl < 0:
            raise ValueError("objective weights must be nonnegative")
        if not 0.0 <= self.rho_si < 1.0:
            raise ValueError("rho_si must lie in [0, 1)")
        if self.eta_penalty0 <= 0:
            raise ValueError("eta_penalty0 must be positive")
        if not 0.0 < self.penalty_decay_c < 1.0:
            raise ValueError("penalty_decay_c must lie in (0, 1)")
        if self.sigma2_dl <= 0 or self.sigma2_bs <= 0:
            raise ValueError("noise powers must be positive")
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.user_radius < 0:
            raise ValueError("user_radius must be nonnegative")
        for name in ("bs_pos", "ris_pos", "dl_center"):
            p = getattr(self, name)
            if len(p) != 3 or not all(math.isfinite(v) for v in p):
                raise ValueError(f"{name} must be a finite 3-D point")
            setattr(self, name, tuple(float(v) for v in p))

    def with_(self, **kwargs) -> "SystemConfig":
        """Copy with replaced fields (re-validated)."""
        return replace(self, **kwargs)


# config-file keys carrying dB / dBm values and the linear field they set
_DB_KEYS = {
    "rho0_db": ("rho0", db_to_linear),
    "rho_si_db": ("rho_si", db_to_linear),
    "kappa_bs_db": ("kappa_bs", db_to_linear),
    "kappa_su_db": ("kappa_su", db_to_linear),
    "sigma2_dl_dbm": ("sigma2_dl", dbm_to_watts),
    "sigma2_bs_dbm": ("sigma2_bs", dbm_to_watts),
}

_FIELD_NAMES = None


def config_field_names() -> set[str]:
    global _FIELD_NAMES
    if _FIELD_NAMES is None:
        _FIELD_NAMES = {f.name for f in fields(SystemConfig)}
    return _FIELD_NAMES


def config_from_dict(data: dict) -> SystemConfig:
    """Build a SystemConfig from a flat key-value mapping.

    Keys are either SystemConfig field names (linear units, watts, meters)
    or the ``*_db`` / ``*_dbm`` convenience keys, which are converted here.
    Unknown keys raise, so typos do not silently fall back to defaults.
    """
    kwargs = {}
    for key, value in data.items():
        if key in _DB_KEYS:
            name, conv = _DB_KEYS[key]
            kwargs[name] = conv(float(value))
        elif key in config_field_names():
            if key in ("bs_pos", "ris_pos", "dl_center"):
                kwargs[key] = tuple(float(v) for v in value)
            elif key in ("n_antennas", "n_elements", "n_ul", "n_dl",
                         "r_max_inner", "max_ao_iters", "rng_seed"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        else:
            raise KeyError(f"unknown config key: {key!r}")
    return SystemConfig(**kwargs)


def load_config(path: str) -> SystemConfig:
    """Load a JSON key-value config file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    return config_from_dict(data)
