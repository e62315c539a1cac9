"""Sparse multimode Fock states with polarization.

Every spatial mode carries two polarization slots (H then V). A basis ket is an
occupation tuple ``(n_0H, n_0V, n_1H, n_1V, ...)`` laid out in registry order,
and a :class:`FockState` is a map from such tuples to complex amplitudes.

States are immutable values; every operation returns a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolation,
    RegistryError,
    TruncationError,
)

DEFAULT_N_MAX = 4
PRUNE_THRESHOLD = 1e-15
NORM_TOLERANCE = 1e-10

POLARIZATIONS = ("H", "V")

Occupation = tuple[int, ...]


@dataclass(frozen=True)
class Mode:
    """A spatial mode with a symbolic frequency tag."""

    label: str
    freq: str = "w0"


class ModeRegistry:
    """Ordered, label-unique collection of modes.

    Parameters
    ----------
    modes : sequence of Mode or (label, freq) pairs
    frequencies : optional declared frequency set; defaults to the tags in use.
    """

    __slots__ = ("modes", "frequencies", "_index")

    def __init__(self, modes: Iterable[Mode | tuple[str, str] | str], frequencies=None):
        parsed = []
        for m in modes:
            if isinstance(m, Mode):
                parsed.append(m)
            elif isinstance(m, str):
                parsed.append(Mode(m))
            else:
                parsed.append(Mode(*m))
        index = {}
        for i, m in enumerate(parsed):
            if m.label in index:
                raise RegistryError(f"duplicate mode label {m.label!r}")
            index[m.label] = i
        used = tuple(dict.fromkeys(m.freq for m in parsed))
        if frequencies is None:
            frequencies = used
        frequencies = tuple(frequencies)
        for f in used:
            if f not in frequencies:
                raise RegistryError(f"frequency tag {f!r} not in declared set {frequencies}")
        self.modes = tuple(parsed)
        self.frequencies = frequencies
        self._index = index

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __contains__(self, label):
        return label in self._index

    def __eq__(self, other):
        return isinstance(other, ModeRegistry) and self.modes == other.modes

    def __hash__(self):
        return hash(self.modes)

    def __repr__(self):
        body = ", ".join(f"{m.label}@{m.freq}" for m in self.modes)
        return f"ModeRegistry([{body}])"

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise RegistryError(f"unknown mode label {label!r}") from None

    def slot(self, label: str, pol: str) -> int:
        if pol not in POLARIZATIONS:
            raise ValueError(f"polarization must be 'H' or 'V', got {pol!r}")
        return 2 * self.index(label) + POLARIZATIONS.index(pol)

    def freq(self, label: str) -> str:
        return self.modes[self.index(label)].freq

    def union(self, other: "ModeRegistry") -> "ModeRegistry":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise RegistryError(f"mode labels collide: {sorted(clash)}")
        freqs = tuple(dict.fromkeys(self.frequencies + other.frequencies))
        return ModeRegistry(self.modes + other.modes, freqs)

    def without(self, labels: Iterable[str]) -> "ModeRegistry":
        drop = set(labels)
        for label in drop:
            self.index(label)
        return ModeRegistry([m for m in self.modes if m.label not in drop], self.frequencies)

    def relabeled(self, mapping: Mapping[str, str]) -> "ModeRegistry":
        return ModeRegistry(
            [Mode(mapping.get(m.label, m.label), m.freq) for m in self.modes], self.frequencies
        )


class FockState:
    """Sparse superposition of occupation kets on a :class:`ModeRegistry`.

    Amplitudes with magnitude below ``prune`` are dropped on construction.
    Pass ``prune=0`` for exact comparisons against dense oracles.
    """

    __slots__ = ("registry", "terms", "n_max")

    def __init__(
        self,
        registry: ModeRegistry,
        terms: Mapping[Occupation, complex],
        n_max: int = DEFAULT_N_MAX,
        prune: float = PRUNE_THRESHOLD,
    ):
        width = 2 * len(registry)
        kept = {}
        for occ, amp in terms.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != width:
                raise RegistryError(f"occupation {occ} has {len(occ)} slots, registry needs {width}")
            amp = complex(amp)
            if abs(amp) <= prune:
                continue
            if min(occ, default=0) < 0:
                raise ContractViolation(f"negative occupation in {occ}")
            if max(occ, default=0) > n_max:
                raise TruncationError(f"occupation {occ} exceeds n_max={n_max}")
            kept[occ] = amp
        self.registry = registry
        self.terms = kept
        self.n_max = n_max

    # -- basic algebra -------------------------------------------------
    def _like(self, terms, prune=PRUNE_THRESHOLD) -> "FockState":
        return FockState(self.registry, terms, self.n_max, prune)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) < tol

    def normalized(self) -> "FockState":
        nrm = self.norm()
        if nrm == 0:
            raise ContractViolation("cannot normalize the zero vector")
        return self._like({k: v / nrm for k, v in self.terms.items()})

    def scaled(self, factor: complex) -> "FockState":
        return self._like({k: v * factor for k, v in self.terms.items()})

    def __add__(self, other: "FockState") -> "FockState":
        _check_same_registry(self, other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return self._like(out)

    def __sub__(self, other: "FockState") -> "FockState":
        return self + other.scaled(-1)

    def inner(self, other: "FockState") -> complex:
        """Return ``<self|other>``."""
        _check_same_registry(self, other)
        small, large = (self.terms, other.terms)
        return sum((small[k].conjugate() * large[k] for k in small if k in large), 0j)

    def amplitude(self, occupation: Mapping[tuple[str, str], int] | Occupation) -> complex:
        if isinstance(occupation, Mapping):
            occ = [0] * (2 * len(self.registry))
            for (label, pol), n in occupation.items():
                occ[self.registry.slot(label, pol)] = n
            occupation = tuple(occ)
        return self.terms.get(tuple(occupation), 0j)

    def is_zero(self) -> bool:
        return not self.terms

    # -- photon bookkeeping --------------------------------------------
    def mode_counts(self, label: str, pol: str | None = None) -> set[int]:
        """Photon numbers present in ``label`` (optionally one slot) across terms."""
        slots = _slots(self.registry, label, pol)
        return {sum(occ[s] for s in slots) for occ in self.terms}

    def total_photons(self) -> set[int]:
        return {sum(occ) for occ in self.terms}

    def project(self, label: str, count: int, pol: str | None = None) -> "FockState":
        """Unnormalized projection onto ``count`` photons in a mode or slot."""
        slots = _slots(self.registry, label, pol)
        return self._like(
            {k: v for k, v in self.terms.items() if sum(k[s] for s in slots) == count}
        )

    def sector(self, total: int) -> "FockState":
        """Unnormalized projection onto a fixed total photon number."""
        return self._like({k: v for k, v in self.terms.items() if sum(k) == total})

    # -- registry surgery ----------------------------------------------
    def drop_modes(self, labels: Iterable[str]) -> "FockState":
        """Remove modes that are empty in every term."""
        labels = list(labels)
        slots = {s for label in labels for s in _slots(self.registry, label, None)}
        for occ in self.terms:
            if any(occ[s] for s in slots):
                raise ContractViolation(f"cannot drop occupied modes {labels}")
        keep = [i for i in range(2 * len(self.registry)) if i not in slots]
        terms = {tuple(k[i] for i in keep): v for k, v in self.terms.items()}
        return FockState(self.registry.without(labels), terms, self.n_max)

    def relabeled(self, mapping: Mapping[str, str]) -> "FockState":
        return FockState(self.registry.relabeled(mapping), self.terms, self.n_max)

    def reordered(self, registry: ModeRegistry) -> "FockState":
        """Express the state on a registry holding the same modes in another order."""
        if sorted(registry.modes, key=lambda m: m.label) != sorted(
            self.registry.modes, key=lambda m: m.label
        ):
            raise RegistryError("reordering needs exactly the same modes")
        perm = []
        for m in registry.modes:
            i = self.registry.index(m.label)
            perm += [2 * i, 2 * i + 1]
        terms = {tuple(k[p] for p in perm): v for k, v in self.terms.items()}
        return FockState(registry, terms, self.n_max)

    # -- serialization -------------------------------------------------
    def serialize(self) -> str:
        """One line per term: ``<occupations> <re> <im>`` in sorted basis order."""
        names = [f"{m.label}:{p}" for m in self.registry.modes for p in POLARIZATIONS]
        lines = []
        for occ in sorted(self.terms):
            amp = self.terms[occ]
            vec = ",".join(f"{n}={c}" for n, c in zip(names, occ))
            lines.append(f"{vec} {amp.real!r} {amp.imag!r}")
        return "\n".join(lines)

    def __repr__(self):
        return f"FockState({len(self.terms)} terms on {self.registry!r})"


def parse_state(text: str, registry: ModeRegistry, n_max: int = DEFAULT_N_MAX) -> FockState:
    """Inverse of :meth:`FockState.serialize`."""
    names = [f"{m.label}:{p}" for m in registry.modes for p in POLARIZATIONS]
    terms = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        vec, re, im = line.split()
        occ = []
        for name, field in zip(names, vec.split(","), strict=True):
            key, _, count = field.rpartition("=")
            if key != name:
                raise RegistryError(f"line {lineno}: expected slot {name}, got {key}")
            occ.append(int(count))
        terms[tuple(occ)] = complex(float(re), float(im))
    return FockState(registry, terms, n_max, prune=0.0)


def _slots(registry: ModeRegistry, label: str, pol: str | None) -> tuple[int, ...]:
    if pol is None:
        i = registry.index(label)
        return (2 * i, 2 * i + 1)
    return (registry.slot(label, pol),)


def _check_same_registry(a: FockState, b: FockState) -> None:
    if a.registry != b.registry:
        raise RegistryError(f"registry mismatch: {a.registry!r} vs {b.registry!r}")


# ---------------------------------------------------------------------
# Construction and ladder operators
# ---------------------------------------------------------------------
def make_vacuum(registry: ModeRegistry, n_max: int = DEFAULT_N_MAX) -> FockState:
    if len(registry) == 0:
        raise ConfigurationError("vacuum needs at least one mode")
    return FockState(registry, {(0,) * (2 * len(registry)): 1.0}, n_max)


def apply_creation(state: FockState, mode: str, pol: str) -> FockState:
    """Apply ``a^dagger`` to one polarization slot; the result is unnormalized."""
    s = state.registry.slot(mode, pol)
    out = {}
    for occ, amp in state.terms.items():
        n = occ[s]
        if n + 1 > state.n_max:
            raise TruncationError(f"creation on {mode}:{pol} exceeds n_max={state.n_max}")
        new = occ[:s] + (n + 1,) + occ[s + 1 :]
        out[new] = out.get(new, 0) + amp * math.sqrt(n + 1)
    return state._like(out)


def apply_annihilation(state: FockState, mode: str, pol: str) -> FockState:
    s = state.registry.slot(mode, pol)
    out = {}
    for occ, amp in state.terms.items():
        n = occ[s]
        if n == 0:
            continue
        new = occ[:s] + (n - 1,) + occ[s + 1 :]
        out[new] = out.get(new, 0) + amp * math.sqrt(n)
    return state._like(out)


def apply_polynomial(state: FockState, monomials: Sequence[tuple[complex, Sequence[tuple[str, str]]]]) -> FockState:
    """Apply ``sum_k c_k prod_j a^dagger_{mode_j,pol_j}`` to ``state``.

    Each monomial is ``(coefficient, [(mode, pol), ...])``; operators are applied
    right to left, which is immaterial since creation operators commute.
    """
    total = None
    for coeff, ops in monomials:
        piece = state
        for mode, pol in reversed(list(ops)):
            piece = apply_creation(piece, mode, pol)
        piece = piece.scaled(coeff)
        total = piece if total is None else total + piece
    return total if total is not None else state.scaled(0)


def apply_linear(state: FockState, slots: Sequence[int], matrix: np.ndarray, prune: float = PRUNE_THRESHOLD) -> FockState:
    """Apply a passive linear-optical map acting on the given slots.

    ``matrix[j, k]`` is the amplitude for a photon entering ``slots[k]`` to leave in
    ``slots[j]``, i.e. ``a^dagger_k -> sum_j matrix[j, k] a^dagger_j``.
    """
    matrix = np.asarray(matrix, dtype=complex)
    k = len(slots)
    if matrix.shape != (k, k):
        raise ValueError(f"matrix shape {matrix.shape} does not match {k} slots")
    cache: dict[tuple[int, ...], dict[tuple[int, ...], complex]] = {}
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        n_in = tuple(occ[s] for s in slots)
        image = cache.get(n_in)
        if image is None:
            image = cache[n_in] = _expand_creation_product(n_in, matrix)
        base = list(occ)
        for s in slots:
            base[s] = 0
        for m_out, coeff in image.items():
            new = list(base)
            for s, m in zip(slots, m_out):
                new[s] = m
            new = tuple(new)
            out[new] = out.get(new, 0) + amp * coeff
    for occ, amp in out.items():
        if abs(amp) > prune and max(occ) > state.n_max:
            raise TruncationError(f"linear map output {occ} exceeds n_max={state.n_max}")
    out = {occ: amp for occ, amp in out.items() if max(occ) <= state.n_max}
    return FockState(state.registry, out, state.n_max, prune)


def _expand_creation_product(n_in: tuple[int, ...], matrix: np.ndarray) -> dict[tuple[int, ...], complex]:
    """Image of ``prod_k (a_k^dagger)^{n_k} / sqrt(n_k!) |0>`` under ``matrix``."""
    k = len(n_in)
    poly: dict[tuple[int, ...], complex] = {(0,) * k: 1.0 + 0j}
    for col, n in enumerate(n_in):
        for _ in range(n):
            nxt: dict[tuple[int, ...], complex] = {}
            for mono, c in poly.items():
                for row in range(k):
                    u = matrix[row, col]
                    if u == 0:
                        continue
                    m = mono[:row] + (mono[row] + 1,) + mono[row + 1 :]
                    nxt[m] = nxt.get(m, 0) + c * u
            poly = nxt
    denom = math.prod(math.factorial(n) for n in n_in)
    return {
        m: c * math.sqrt(math.prod(math.factorial(x) for x in m) / denom)
        for m, c in poly.items()
        if c != 0
    }


def tensor(a: FockState, b: FockState) -> FockState:
    """Product state on the union registry (labels must be disjoint)."""
    registry = a.registry.union(b.registry)
    terms = {}
    for ka, va in a.terms.items():
        for kb, vb in b.terms.items():
            terms[ka + kb] = va * vb
    return FockState(registry, terms, max(a.n_max, b.n_max))


# ---------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------
class MeasurementBranch(NamedTuple):
    count: int
    probability: float
    state: FockState


def photon_number_branches(state: FockState, mode: str, pol: str | None = None) -> list[MeasurementBranch]:
    """All outcomes of a projective photon-number readout, sorted by count."""
    if not state.is_normalized():
        raise ContractViolation(f"measurement needs a normalized state (norm={state.norm():.3g})")
    branches = []
    for count in sorted(state.mode_counts(mode, pol)):
        proj = state.project(mode, count, pol)
        p = proj.norm() ** 2
        if p > 0:
            branches.append(MeasurementBranch(count, p, proj.normalized()))
    return branches


def measure_photon_number(state: FockState, mode: str, rng: np.random.Generator, pol: str | None = None) -> MeasurementBranch:
    """Sample one readout outcome with its exact Born probability."""
    branches = photon_number_branches(state, mode, pol)
    return branches[choose([b.probability for b in branches], rng)]


def choose(probabilities: Sequence[float], rng: np.random.Generator) -> int:
    """Index drawn from a discrete distribution using one uniform variate."""
    u = rng.random() * math.fsum(probabilities)
    acc = 0.0
    for i, p in enumerate(probabilities):
        acc += p
        if u < acc:
            return i
    return len(probabilities) - 1


# ---------------------------------------------------------------------
# Mixtures and fidelity
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class MixedState:
    """Classical mixture of pure states sharing one registry."""

    branches: tuple[tuple[float, FockState], ...]

    def __post_init__(self):
        if not self.branches:
            raise ContractViolation("a mixed state needs at least one branch")
        weights = [w for w, _ in self.branches]
        if min(weights) < 0 or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ContractViolation(f"mixture weights must be non-negative and sum to 1: {weights}")
        reg = self.branches[0][1].registry
        if any(s.registry != reg for _, s in self.branches):
            raise RegistryError("mixture branches live on different registries")

    @classmethod
    def pure(cls, state: FockState) -> "MixedState":
        return cls(((1.0, state),))

    @property
    def registry(self) -> ModeRegistry:
        return self.branches[0][1].registry

    def map(self, fn) -> "MixedState":
        return MixedState(tuple((w, fn(s)) for w, s in self.branches))

    def density_matrix(self) -> tuple[list[Occupation], np.ndarray]:
        """Dense density matrix over the occupations present in any branch."""
        basis = sorted({k for _, s in self.branches for k in s.terms})
        index = {k: i for i, k in enumerate(basis)}
        rho = np.zeros((len(basis), len(basis)), dtype=complex)
        for w, s in self.branches:
            v = np.zeros(len(basis), dtype=complex)
            for k, a in s.terms.items():
                v[index[k]] = a
            rho += w * np.outer(v, v.conj())
        return basis, rho


def fidelity(state: Union[FockState, MixedState], target: FockState) -> float:
    """Overlap ``<target|rho|target>`` with a pure target."""
    if isinstance(state, FockState):
        state = MixedState.pure(state)
    total = 0.0
    for w, s in state.branches:
        total += w * abs(target.inner(s)) ** 2
    return min(max(total, 0.0), 1.0)


# ---------------------------------------------------------------------
# Dense views (oracle comparisons)
# ---------------------------------------------------------------------
def dense_index(occupation: Occupation, n_max: int) -> int:
    idx = 0
    for n in occupation:
        idx = idx * (n_max + 1) + n
    return idx


def to_dense(state: FockState) -> np.ndarray:
    """State vector on the full truncated product basis (slot-major, H before V)."""
    dim = (state.n_max + 1) ** (2 * len(state.registry))
    vec = np.zeros(dim, dtype=complex)
    for occ, amp in state.terms.items():
        vec[dense_index(occ, state.n_max)] = amp
    return vec
