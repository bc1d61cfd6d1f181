"""STAR-RIS assisted downlink-NOMA / uplink-backscatter system simulator.

Subpackages/modules:
    config    scenario parameters and config-file parsing
    channels  geometry and random channel generation
    lifting   effective/cascaded channels and lifted matrix algebra
    rates     rate, SINR, interference and feasibility evaluation
    conic     dense operator-splitting conic solver (LP/SOC/RSOC/SDP)
    sca       the four subproblem solvers (transmit, receive, passive, order)
    driver    alternating-optimization orchestration and baselines
    bench     experiment harness and CLI
"""

from .config import SystemConfig, load_config
from .channels import ChannelSet, generate_channels, path_loss, place_users

__all__ = [
    "SystemConfig",
    "load_config",
    "ChannelSet",
    "generate_channels",
    "path_loss",
    "place_users",
]
