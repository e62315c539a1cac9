"""Entangled-pair sources: the double-photon gun and parametric down-conversion."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .elements import SQRT1_2, apply_local_unitary
from .errors import ContractViolation, DomainError, TruncationError
from .fock import (
    DEFAULT_N_MAX,
    FockState,
    ModeRegistry,
    apply_annihilation,
    apply_creation,
    apply_polynomial,
    choose,
    make_vacuum,
)


class BellKind(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


# Local operation on the second photon taking |Phi+> to each Bell state.
BELL_ROTATIONS = {
    BellKind.PHI_PLUS: "I",
    BellKind.PHI_MINUS: "Z",
    BellKind.PSI_PLUS: "X",
    BellKind.PSI_MINUS: "X.Z",
}


def bell_state(registry: ModeRegistry, mode_a: str, mode_b: str, kind: BellKind = BellKind.PHI_PLUS, n_max: int = DEFAULT_N_MAX) -> FockState:
    """The Bell state written out directly from its H/V expansion."""
    s = {
        BellKind.PHI_PLUS: ("H", "H", "V", "V", 1),
        BellKind.PHI_MINUS: ("H", "H", "V", "V", -1),
        BellKind.PSI_PLUS: ("H", "V", "V", "H", 1),
        BellKind.PSI_MINUS: ("H", "V", "V", "H", -1),
    }[kind]
    pa, pb, qa, qb, sign = s
    return apply_polynomial(
        make_vacuum(registry, n_max),
        [(SQRT1_2, [(mode_a, pa), (mode_b, pb)]), (sign * SQRT1_2, [(mode_a, qa), (mode_b, qb)])],
    )


def emit_pair(state: FockState, mode_a: str, mode_b: str, kind: BellKind = BellKind.PHI_PLUS) -> FockState:
    """Add one Bell pair to two empty modes of an existing state.

    The gun always produces |Phi+> and reaches the other Bell states with a
    local wave plate on ``mode_b``.
    """
    for m in (mode_a, mode_b):
        if state.mode_counts(m) != {0}:
            raise ContractViolation(f"gun output mode {m!r} is not empty")
    out = apply_polynomial(
        state, [(SQRT1_2, [(mode_a, "H"), (mode_b, "H")]), (SQRT1_2, [(mode_a, "V"), (mode_b, "V")])]
    )
    return apply_local_unitary(out, mode_b, BELL_ROTATIONS[kind])


@dataclass(frozen=True)
class GunParams:
    """Triggered pair source: fires with probability ``p_s``, never emits two pairs."""

    p_s: float = 1.0
    emitted_kind: BellKind = BellKind.PHI_PLUS
    freq_pair: tuple[str, str] = ("w1", "w2")

    def __post_init__(self):
        if not 0.0 <= self.p_s <= 1.0:
            raise DomainError(f"p_s must lie in [0, 1], got {self.p_s}")
        if self.freq_pair[0] == self.freq_pair[1]:
            raise ContractViolation("a double-photon gun emits two distinct frequencies")

    def reversed(self) -> "GunParams":
        return GunParams(self.p_s, self.emitted_kind, self.freq_pair[::-1])


def gun_branches(state: FockState, mode_a: str, mode_b: str, params: GunParams) -> list[tuple[float, bool, FockState]]:
    """``(probability, fired, state)`` for both outcomes of one trigger."""
    reg = state.registry
    got = (reg.freq(mode_a), reg.freq(mode_b))
    if got != tuple(params.freq_pair):
        raise ContractViolation(f"gun emits {params.freq_pair} but modes are tagged {got}")
    out = []
    if params.p_s > 0:
        out.append((params.p_s, True, emit_pair(state, mode_a, mode_b, params.emitted_kind)))
    if params.p_s < 1:
        for m in (mode_a, mode_b):
            if state.mode_counts(m) != {0}:
                raise ContractViolation(f"gun output mode {m!r} is not empty")
        out.append((1.0 - params.p_s, False, state))
    return out


def fire_gun(registry: ModeRegistry, mode_a: str, mode_b: str, params: GunParams, rng: np.random.Generator, n_max: int = DEFAULT_N_MAX) -> tuple[bool, FockState]:
    """Trigger the gun once into an otherwise empty registry."""
    branches = gun_branches(make_vacuum(registry, n_max), mode_a, mode_b, params)
    _, fired, state = branches[choose([b[0] for b in branches], rng)]
    return fired, state


# ---------------------------------------------------------------------
# Parametric down-conversion
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class PdcParams:
    """Pair amplitude ``epsilon`` (|epsilon| < 1) and the kept number of pairs."""

    epsilon: complex = 0.1
    n_max: int = 3

    def __post_init__(self):
        if abs(self.epsilon) >= 1:
            raise DomainError(f"|epsilon| must be < 1, got {abs(self.epsilon)}")
        if self.n_max < 0:
            raise DomainError("n_max must be non-negative")


def multipair_normalization(n: int) -> float:
    """``1/sqrt(n!(n+1)!)``: the factor making ``L+^n |0>`` a unit vector."""
    return 1.0 / math.sqrt(math.factorial(n) * math.factorial(n + 1))


def apply_l_plus(state: FockState, mode_a: str, mode_b: str) -> FockState:
    """Singlet-pair creation ``a_H^+ b_V^+ - a_V^+ b_H^+``."""
    return apply_polynomial(state, [(1, [(mode_a, "H"), (mode_b, "V")]), (-1, [(mode_a, "V"), (mode_b, "H")])])


def apply_l_minus(state: FockState, mode_a: str, mode_b: str) -> FockState:
    """Adjoint of :func:`apply_l_plus`."""
    t1 = apply_annihilation(apply_annihilation(state, mode_b, "V"), mode_a, "H")
    t2 = apply_annihilation(apply_annihilation(state, mode_b, "H"), mode_a, "V")
    return t1 - t2


def apply_l_zero(state: FockState, mode_a: str, mode_b: str) -> FockState:
    """``L0 = (N_a + N_b + 2) / 2``, diagonal in the Fock basis."""
    reg = state.registry
    slots = [reg.slot(m, p) for m in (mode_a, mode_b) for p in ("H", "V")]
    return state._like({k: v * (sum(k[s] for s in slots) + 2) / 2 for k, v in state.terms.items()})


def pdc_sector_coefficients(params: PdcParams, expansion: str = "exact") -> list[complex]:
    """Coefficient ``c_n`` of ``L+^n |0>`` for ``n = 0..params.n_max`` before truncation renormalization.

    ``"exact"`` is the disentangled exponential: ``(1 - |eps|^2) eps^n / n!``.
    ``"literal"`` is the written multi-pair series ``N_n eps^n`` with
    ``N_n = 1/sqrt(n!(n+1)!)``, which gives every n-pair sector the same weight
    ``|eps|^{2n}`` and therefore drops the ``(n+1)`` degeneracy factor.
    """
    eps = complex(params.epsilon)
    if expansion == "exact":
        pref = 1.0 - abs(eps) ** 2
        return [pref * eps**n / math.factorial(n) for n in range(params.n_max + 1)]
    if expansion == "literal":
        return [multipair_normalization(n) * eps**n for n in range(params.n_max + 1)]
    raise ValueError(f"unknown expansion {expansion!r}")


def pdc_state(
    registry: ModeRegistry,
    params: PdcParams,
    mode_a: str | None = None,
    mode_b: str | None = None,
    expansion: str = "exact",
    normalize: bool = True,
    fock_n_max: int = DEFAULT_N_MAX,
) -> FockState:
    """Down-converter output truncated at ``params.n_max`` pairs.

    With ``expansion="exact"`` and ``normalize=False`` the kept sectors carry the
    exact amplitudes of ``exp(xi L+ - xi* L-)|0>`` with ``eps = e^{i arg xi} tanh|xi|``.
    """
    if params.n_max > fock_n_max:
        raise TruncationError(f"{params.n_max} pairs need n_max >= {params.n_max}, engine has {fock_n_max}")
    labels = registry.labels
    mode_a = mode_a or labels[0]
    mode_b = mode_b or labels[1]
    coeffs = pdc_sector_coefficients(params, expansion)
    ladder = make_vacuum(registry, fock_n_max)
    total = ladder.scaled(coeffs[0])
    for n in range(1, params.n_max + 1):
        ladder = apply_l_plus(ladder, mode_a, mode_b)
        total = total + ladder.scaled(coeffs[n])
    return total.normalized() if normalize else total


def pair_sector(state: FockState, n: int) -> FockState:
    """Unnormalized ``n``-pair component (``2n`` photons)."""
    return state.sector(2 * n)


def pair_sector_probabilities(state: FockState, n_max: int) -> list[float]:
    return [pair_sector(state, n).norm() ** 2 for n in range(n_max + 1)]


@dataclass
class Su11Report:
    """Residual norms of the su(1,1) relations on low-lying basis kets."""

    entries: list[tuple[tuple[int, ...], float, float]] = field(default_factory=list)

    @property
    def max_lowering_raising(self) -> float:
        return max((e[1] for e in self.entries), default=0.0)

    @property
    def max_zero_raising(self) -> float:
        return max((e[2] for e in self.entries), default=0.0)


def su11_residuals(registry: ModeRegistry, n_max: int = DEFAULT_N_MAX, mode_a: str | None = None, mode_b: str | None = None) -> Su11Report:
    """Check ``[L-, L+] = 2 L0`` and ``[L0, L+] = L+`` on kets with at most ``n_max - 2`` photons."""
    if n_max < 2:
        raise DomainError("su(1,1) residuals need n_max >= 2")
    labels = registry.labels
    mode_a = mode_a or labels[0]
    mode_b = mode_b or labels[1]
    reg = registry
    slots = [reg.slot(m, p) for m in (mode_a, mode_b) for p in ("H", "V")]
    width = 2 * len(reg)
    report = Su11Report()
    limit = n_max - 2
    for counts in np.ndindex(*(limit + 1,) * 4):
        if sum(counts) > limit:
            continue
        occ = [0] * width
        for s, c in zip(slots, counts):
            occ[s] = int(c)
        psi = FockState(reg, {tuple(occ): 1.0}, n_max)
        lp = lambda s: apply_l_plus(s, mode_a, mode_b)  # noqa: E731
        lm = lambda s: apply_l_minus(s, mode_a, mode_b)  # noqa: E731
        l0 = lambda s: apply_l_zero(s, mode_a, mode_b)  # noqa: E731
        r1 = lm(lp(psi)) - lp(lm(psi)) - l0(psi).scaled(2)
        r2 = l0(lp(psi)) - lp(l0(psi)) - lp(psi)
        report.entries.append((tuple(int(c) for c in counts), r1.norm(), r2.norm()))
    return report
