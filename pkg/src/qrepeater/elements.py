"""Passive optics, detectors and the pair-transit noise channel.

Conventions (frozen; the CNOT correction table depends on them):

* Linear PBS transmits H and reflects V; circular PBS transmits R and reflects L,
  with ``R = (H + iV)/sqrt2`` and ``L = (H - iV)/sqrt2``.
* A reflected photon picks up ``+i`` going a->b and ``-i`` going b->a, so the
  port map of the reflected polarization is Pauli-Y and both splitters are
  Hermitian involutions.
* The 50/50 beam splitter is symmetric: ``a -> (a + i b)/sqrt2``, ``b -> (i a + b)/sqrt2``.
* Detectors are non-number-resolving buckets behind a polarizing splitter with
  efficiency ``eta`` per photon and no dark counts. Detected photons are absorbed.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, DomainError, FrequencyMismatch, RoutingError
from .fock import FockState, MixedState, apply_linear, choose

SQRT1_2 = 1 / math.sqrt(2)
UNITARITY_TOLERANCE = 1e-12

# Single-qubit unitaries on the (H, V) polarization basis.
GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "Had": np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2,
}


@functools.lru_cache(maxsize=None)
def _gate(tag: str) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for name in tag.split("."):
        u = u @ GATES[name]
    u.setflags(write=False)
    return u


def gate(tag: str) -> np.ndarray:
    """Unitary for a product tag such as ``"X"`` or ``"Z.S"`` (rightmost applied first)."""
    return _gate(tag).copy()


class BeamSplitterBasis(enum.Enum):
    LINEAR = "linear"
    CIRCULAR = "circular"

    @property
    def pols(self) -> tuple[str, str]:
        """(transmitted, reflected) polarization names."""
        return ("H", "V") if self is BeamSplitterBasis.LINEAR else ("R", "L")

    @property
    def vectors(self) -> np.ndarray:
        """Columns are the (transmitted, reflected) polarization vectors in H/V."""
        if self is BeamSplitterBasis.LINEAR:
            return np.eye(2, dtype=complex)
        return np.array([[1, 1], [1j, -1j]], dtype=complex) * SQRT1_2


LINEAR = BeamSplitterBasis.LINEAR
CIRCULAR = BeamSplitterBasis.CIRCULAR

_REFLECT_PORTS = np.array([[0, -1j], [1j, 0]], dtype=complex)


def pbs_matrix(basis: BeamSplitterBasis) -> np.ndarray:
    """4x4 single-photon map on slots (aH, aV, bH, bV)."""
    b = basis.vectors
    transmit = np.outer(b[:, 0], b[:, 0].conj())
    reflect = np.outer(b[:, 1], b[:, 1].conj())
    return np.kron(np.eye(2), transmit) + np.kron(_REFLECT_PORTS, reflect)


BS_MATRIX = np.kron(np.array([[1, 1j], [1j, 1]], dtype=complex) * SQRT1_2, np.eye(2))


def _port_slots(state: FockState, a: str, b: str) -> list[int]:
    reg = state.registry
    return [reg.slot(a, "H"), reg.slot(a, "V"), reg.slot(b, "H"), reg.slot(b, "V")]


def check_interference(state: FockState, port_a: str, port_b: str) -> None:
    """Enforce the equal-frequency rule for a two-port interferometric element.

    Unequal tags are only tolerated while both ports are empty in every term.
    """
    fa, fb = state.registry.freq(port_a), state.registry.freq(port_b)
    if fa == fb:
        return
    occupied = state.mode_counts(port_a) | state.mode_counts(port_b)
    if occupied - {0}:
        raise FrequencyMismatch(
            f"ports {port_a!r} ({fa}) and {port_b!r} ({fb}) carry different frequencies"
        )


def apply_pbs(state: FockState, port_a: str, port_b: str, basis: BeamSplitterBasis) -> FockState:
    """Polarizing beam splitter; output ports reuse the input labels."""
    if port_a == port_b:
        raise ContractViolation("a beam splitter needs two distinct ports")
    check_interference(state, port_a, port_b)
    return apply_linear(state, _port_slots(state, port_a, port_b), pbs_matrix(basis))


def apply_beam_splitter(state: FockState, port_a: str, port_b: str) -> FockState:
    """Polarization-independent 50/50 beam splitter."""
    if port_a == port_b:
        raise ContractViolation("a beam splitter needs two distinct ports")
    check_interference(state, port_a, port_b)
    return apply_linear(state, _port_slots(state, port_a, port_b), BS_MATRIX)


def apply_local_unitary(state: FockState, mode: str, u) -> FockState:
    """Act with a 2x2 polarization unitary (array or gate tag) on one mode."""
    if isinstance(u, str):
        u = gate(u)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or np.abs(u.conj().T @ u - np.eye(2)).max() > UNITARITY_TOLERANCE:
        raise ContractViolation("local polarization operation must be a 2x2 unitary")
    reg = state.registry
    return apply_linear(state, [reg.slot(mode, "H"), reg.slot(mode, "V")], u)


def dichroic_split(state: FockState, in_mode: str, out_low: str, out_high: str) -> FockState:
    """Route the frequency components of a spatial mode onto two output modes.

    A spatial mode carrying several frequencies is stored as registry modes
    labelled ``"<in_mode>@<freq>"``. Each component moves to whichever output has
    the matching frequency tag; polarization is untouched. Outputs must be empty.
    """
    reg = state.registry
    routes = {reg.freq(out_low): out_low, reg.freq(out_high): out_high}
    if len(routes) != 2:
        raise RoutingError("dichroic outputs need two distinct frequency tags")
    components = [m.label for m in reg.modes if m.label.split("@")[0] == in_mode]
    if not components:
        raise RoutingError(f"no modes belong to spatial mode {in_mode!r}")
    for out in (out_low, out_high):
        if state.mode_counts(out) - {0}:
            raise ContractViolation(f"dichroic output {out!r} is not empty")
    moves = []
    for label in components:
        if not state.mode_counts(label) - {0}:
            continue
        f = reg.freq(label)
        if f not in routes:
            raise RoutingError(f"{label!r} carries frequency {f!r}; no output for it")
        moves.append((label, routes[f]))
    out = state
    for src, dst in moves:
        out = _move_mode(out, src, dst)
    return out


def _move_mode(state: FockState, src: str, dst: str) -> FockState:
    reg = state.registry
    pairs = [(reg.slot(src, p), reg.slot(dst, p)) for p in ("H", "V")]
    terms = {}
    for occ, amp in state.terms.items():
        new = list(occ)
        for s, d in pairs:
            new[d] += new[s]
            new[s] = 0
        terms[tuple(new)] = amp
    return FockState(reg, terms, state.n_max)


# ---------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class DetectorRecord:
    mode: str
    clicked: bool
    basis: BeamSplitterBasis
    resolved_pol: str | None
    efficiency: float
    bucket_clicks: tuple[bool, bool] = (False, False)

    def __post_init__(self):
        if self.resolved_pol is not None and not self.clicked:
            raise ContractViolation("resolved polarization requires a click")

    @property
    def single(self) -> bool:
        """Exactly one of the two polarization buckets fired."""
        return sum(self.bucket_clicks) == 1


class DetectionBranch(NamedTuple):
    record: DetectorRecord
    probability: float
    state: FockState
    counts: tuple[int, int]


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"detector efficiency must lie in [0, 1], got {eta}")


def detection_branches(state: FockState, mode: str, basis: BeamSplitterBasis, eta: float) -> list[DetectionBranch]:
    """Exhaustive outcomes of a polarization-resolved bucket detection.

    Branches are fine-grained by the absorbed photon numbers, so every branch
    carries a pure post-measurement state with ``mode`` emptied.
    """
    _check_eta(eta)
    if not state.is_normalized():
        raise ContractViolation("detection needs a normalized state")
    reg = state.registry
    slots = [reg.slot(mode, "H"), reg.slot(mode, "V")]
    rotated = apply_linear(state, slots, basis.vectors.conj().T)
    sectors: dict[tuple[int, int], dict] = {}
    for occ, amp in rotated.terms.items():
        key = (occ[slots[0]], occ[slots[1]])
        emptied = list(occ)
        emptied[slots[0]] = emptied[slots[1]] = 0
        sectors.setdefault(key, {})[tuple(emptied)] = amp
    pols = basis.pols
    branches = []
    for counts in sorted(sectors):
        sub = FockState(reg, sectors[counts], state.n_max)
        p_sector = sub.norm() ** 2
        if p_sector == 0:
            continue
        post = sub.normalized()
        click_p = [1.0 - (1.0 - eta) ** n for n in counts]
        for c0 in (False, True):
            for c1 in (False, True):
                p = p_sector
                p *= click_p[0] if c0 else 1.0 - click_p[0]
                p *= click_p[1] if c1 else 1.0 - click_p[1]
                if p <= 0:
                    continue
                resolved = pols[0] if (c0 and not c1) else pols[1] if (c1 and not c0) else None
                record = DetectorRecord(mode, c0 or c1, basis, resolved, eta, (c0, c1))
                branches.append(DetectionBranch(record, p, post, counts))
    return branches


def detect(state: FockState, mode: str, basis: BeamSplitterBasis, eta: float, rng: np.random.Generator) -> tuple[DetectorRecord, FockState]:
    """Sample a detection; returns the record and the conditioned post-state."""
    branches = detection_branches(state, mode, basis, eta)
    b = branches[choose([x.probability for x in branches], rng)]
    return b.record, b.state


# ---------------------------------------------------------------------
# Pair-transit channel
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class ChannelParams:
    """Pair-level noise: dephasing probability and pair-survival probability."""

    gamma: float = 0.0
    zeta: float = 1.0

    def __post_init__(self):
        for name in ("gamma", "zeta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")


class TransitBranch(NamedTuple):
    probability: float
    survived: bool
    dephased: bool
    state: FockState


def _vacuum_like(state: FockState) -> FockState:
    return FockState(state.registry, {(0,) * (2 * len(state.registry)): 1.0}, state.n_max)


def channel_transit_branches(pair_state: FockState, params: ChannelParams, dephase_mode: str | None = None) -> list[TransitBranch]:
    """Loss with probability ``1 - zeta``, then a Z flip with probability ``gamma``.

    ``dephase_mode`` names the photon that receives the flip (the one farther from
    the source); it defaults to the last occupied mode in registry order.
    """
    if pair_state.total_photons() != {2}:
        raise ContractViolation("channel transit expects exactly one photon pair")
    if dephase_mode is None:
        occupied = [m.label for m in pair_state.registry if pair_state.mode_counts(m.label) - {0}]
        dephase_mode = occupied[-1]
    flipped = apply_local_unitary(pair_state, dephase_mode, "Z")
    g, z = params.gamma, params.zeta
    branches = [
        TransitBranch(z * (1 - g), True, False, pair_state),
        TransitBranch(z * g, True, True, flipped),
        TransitBranch(1 - z, False, False, _vacuum_like(pair_state)),
    ]
    return [b for b in branches if b.probability > 0]


def channel_transit(pair_state: FockState, params: ChannelParams, rng: np.random.Generator, dephase_mode: str | None = None) -> tuple[bool, bool, MixedState]:
    branches = channel_transit_branches(pair_state, params, dephase_mode)
    b = branches[choose([x.probability for x in branches], rng)]
    return b.survived, b.dephased, MixedState.pure(b.state)
