"""Sparse Fock-space simulator for a linear-optics quantum repeater.

Modules
-------
fock
    Sparse multimode polarization Fock states and passive linear optics.
elements
    Beam splitters, detectors, dichroic routing and the pair-transit channel.
sources
    Double-photon gun and parametric down-conversion.
gates
    Heralded CNOT, QND presence check and partial Bell analyzer.
protocol
    Link distribution, purification, swapping and the Monte Carlo harness.
analytics
    Closed-form rates, component tallies and the component-count table.
cli
    Batch front end.
"""

from .analytics import NoiseParams, p_pur, p_swap, table1, tally_resources
from .errors import (
    ConfigurationError,
    ContractViolation,
    DomainError,
    FrequencyMismatch,
    RegistryError,
    RepeaterError,
    RoutingError,
    TopologyError,
    TruncationError,
    UnsupportedInput,
)
from .fock import FockState, Mode, ModeRegistry, make_vacuum, parse_state
from .protocol import ChainConfig, RateReport, run_chain

__all__ = [
    "ChainConfig",
    "ConfigurationError",
    "ContractViolation",
    "DomainError",
    "FockState",
    "FrequencyMismatch",
    "Mode",
    "ModeRegistry",
    "NoiseParams",
    "RateReport",
    "RegistryError",
    "RepeaterError",
    "RoutingError",
    "TopologyError",
    "TruncationError",
    "UnsupportedInput",
    "make_vacuum",
    "p_pur",
    "p_swap",
    "run_chain",
    "table1",
    "tally_resources",
]

__version__ = "0.1.0"
