"""Exception hierarchy shared by every layer of the simulator."""


class RepeaterError(Exception):
    """Base class for all errors raised by :mod:`qrepeater`."""


class ConfigurationError(RepeaterError):
    """Invalid run or object configuration (empty registry, bad chain, ...)."""


class RegistryError(RepeaterError):
    """Mode-label collisions, unknown labels or mismatched registries."""


class TruncationError(RepeaterError):
    """An operation would push an occupation above the truncation ``n_max``."""


class ContractViolation(RepeaterError):
    """A documented precondition of an operation does not hold."""


class FrequencyMismatch(RepeaterError):
    """Photons with different frequency tags meet in one interferometric element."""


class RoutingError(RepeaterError):
    """A dichroic element received a frequency it has no output for."""


class TopologyError(RepeaterError):
    """Link pairs do not share the stations an operation requires."""


class UnsupportedInput(RepeaterError):
    """Input lies outside the modelled regime (e.g. multi-photon QND input)."""


class DomainError(RepeaterError, ValueError):
    """A numeric parameter lies outside its allowed range."""
