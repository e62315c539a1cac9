"""Closed-form success probabilities and component counts.

Two conventions are carried side by side:

``with_qnd``
    The purification probability with every factor, including the QND screen.
``without_qnd``
    The same product with the QND factor dropped. This is the only reading under
    which the published component table is reproduced (to one significant figure
    for eta = 0.8 and 1, within a factor 1.4 at eta = 0.3); the ``with_qnd`` counts are
    larger by exactly ``1/p_qnd``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

from .errors import DomainError

WITH_QND = "with_qnd"
WITHOUT_QND = "without_qnd"
CONVENTIONS = (WITH_QND, WITHOUT_QND)

REFERENCE_ETAS = (0.3, 0.8, 1.0)

# Published table values: eta -> (N_pur, N_swap, N_total).
PUBLISHED_COUNTS = {
    0.3: (3e7, 20.0, 1e9),
    0.8: (2e3, 3.0, 1e4),
    1.0: (250.0, 2.0, 1e3),
}

# Transistor count the published table is compared against; annotation only.
PENTIUM_TRANSISTORS = 1e7


@dataclass(frozen=True)
class NoiseParams:
    """The six scalars of the purification and swapping rates."""

    p_s: float = 0.9
    eta: float = 1.0
    gamma: float = 0.5
    zeta: float = math.sqrt(2) / 2
    p_cnot: float = 0.25
    p_qnd: float = 0.125

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {value!r}")

    def replace(self, **changes) -> "NoiseParams":
        return NoiseParams(**{**asdict(self), **changes})


@dataclass(frozen=True)
class ComponentTally:
    guns: int = 0
    detectors: int = 0

    def __add__(self, other: "ComponentTally") -> "ComponentTally":
        return ComponentTally(self.guns + other.guns, self.detectors + other.detectors)

    def __mul__(self, k: int) -> "ComponentTally":
        return ComponentTally(self.guns * k, self.detectors * k)

    __rmul__ = __mul__


# Per-component resource counts. The CNOT's third detector is the target
# readout done by the purifier; it is booked against the gate.
CNOT_TALLY = ComponentTally(guns=1, detectors=3)
QND_TALLY = ComponentTally(guns=2, detectors=4)
SOURCE_TALLY = ComponentTally(guns=1, detectors=0)
SWAPPER_TALLY = ComponentTally(guns=0, detectors=2)
PURIFIER_TALLY = 2 * SOURCE_TALLY + QND_TALLY + 2 * CNOT_TALLY


def tally_resources(kind: str, n_links: int | None = None) -> ComponentTally:
    """Guns and detectors for ``"purifier"``, ``"swapper"``, ``"cnot"``, ``"qnd"`` or ``"chain"``."""
    if kind == "purifier":
        return PURIFIER_TALLY
    if kind == "swapper":
        return SWAPPER_TALLY
    if kind == "cnot":
        return CNOT_TALLY
    if kind == "qnd":
        return QND_TALLY
    if kind == "chain":
        if n_links is None or n_links < 1:
            raise DomainError("a chain needs n_links >= 1")
        return n_links * PURIFIER_TALLY + (n_links - 1) * SWAPPER_TALLY
    raise DomainError(f"unknown component kind {kind!r}")


def p_pur(params: NoiseParams, include_qnd: bool = True) -> float:
    """Probability that one purifier delivers a pair."""
    p = (
        params.p_s**6
        * params.eta**10
        * (1 - params.gamma) ** 2
        * params.zeta**2
        * params.p_cnot**2
    )
    return p * params.p_qnd if include_qnd else p


def p_swap(eta: float) -> float:
    """Swapping success: two-fold coincidence times the 1/2 partial Bell measurement."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    return eta**2 / 2


def _inv(p: float) -> float:
    return math.inf if p == 0 else 1.0 / p


@dataclass(frozen=True)
class Table1Row:
    eta: float
    n_pur: float
    n_swap: float
    n_total: float
    convention: str


def table1(params: NoiseParams, etas: Iterable[float] = REFERENCE_ETAS, include_qnd: bool = False) -> list[Table1Row]:
    convention = WITH_QND if include_qnd else WITHOUT_QND
    rows = []
    for eta in etas:
        p = params.replace(eta=eta)
        n_pur = _inv(p_pur(p, include_qnd))
        n_swap = _inv(p_swap(eta))
        rows.append(Table1Row(eta, n_pur, n_swap, 2 * n_pur * n_swap, convention))
    return rows


def round_to_one_figure(x: float) -> float:
    """One significant figure, as the published table prints its counts."""
    if not math.isfinite(x) or x == 0:
        return x
    return float(f"{x:.1g}")


def agrees_to_one_figure(value: float, published: float) -> bool:
    """``value`` lies within half a unit of the published entry's leading digit."""
    unit = 10.0 ** math.floor(math.log10(abs(published)))
    return abs(value - published) <= 0.5 * unit


def order_of_magnitude(x: float) -> int:
    """Nearest power of ten, the reading of a "~10^k" table entry."""
    return round(math.log10(x))


def annotate(row: Table1Row) -> str:
    """Human note comparing a row against the published table."""
    published = PUBLISHED_COUNTS.get(row.eta)
    notes = []
    if row.convention == WITH_QND:
        notes.append("includes p_qnd; published table omits it (counts 1/p_qnd larger)")
    if published is not None:
        ratio = row.n_pur / published[0]
        notes.append(f"N_pur/published = {ratio:.3g}")
    if row.n_total > PENTIUM_TRANSISTORS:
        notes.append("exceeds ~1e7 transistor scale")
    return "; ".join(notes)


@dataclass(frozen=True)
class ExpectedComponents:
    """Parallel-use component counts for one repeater node (two links, one swapper)."""

    n_pur: float
    n_swap: float
    purifiers: float
    swappers: float
    resources_guns: float
    resources_detectors: float

    @property
    def n_total(self) -> float:
        return self.purifiers


def expected_components(params: NoiseParams, include_qnd: bool = False) -> ExpectedComponents:
    """Scale per-component tallies by the expected number of parallel copies.

    Each of the ``N_swap`` swapper copies is fed by two banks of ``N_pur``
    purifiers, giving ``2 N_pur N_swap`` purifiers in total.
    """
    n_pur = _inv(p_pur(params, include_qnd))
    n_swap = _inv(p_swap(params.eta))
    purifiers = 2 * n_pur * n_swap
    return ExpectedComponents(
        n_pur=n_pur,
        n_swap=n_swap,
        purifiers=purifiers,
        swappers=n_swap,
        resources_guns=purifiers * PURIFIER_TALLY.guns + n_swap * SWAPPER_TALLY.guns,
        resources_detectors=purifiers * PURIFIER_TALLY.detectors + n_swap * SWAPPER_TALLY.detectors,
    )


def chain_success_probability(params: NoiseParams, n_links: int, include_qnd: bool = True) -> float:
    """All-parallel chain: every link purifies and every node swaps in the same shot."""
    if n_links < 1:
        raise DomainError("a chain needs n_links >= 1")
    return p_pur(params, include_qnd) ** n_links * p_swap(params.eta) ** (n_links - 1)
