"""Subproblem solvers: SCA bounds, transmit SDP, closed-form receive
beamforming, penalty-based passive beamforming and decoding-order search."""

from .bounds import (bilinear_lower_bound, bilinear_upper_bound,
                     combined_gain_lower_bound, rate_lower_bound,
                     spectral_norm_tangent, trace_product_lower_bound)
from .receive import optimal_receive, receive_quotient
from .transmit import solve_transmit
from .passive import solve_passive
from .ordering import decoding_order

__all__ = [
    "rate_lower_bound",
    "bilinear_lower_bound",
    "bilinear_upper_bound",
    "spectral_norm_tangent",
    "trace_product_lower_bound",
    "combined_gain_lower_bound",
    "optimal_receive",
    "receive_quotient",
    "solve_transmit",
    "solve_passive",
    "decoding_order",
]
