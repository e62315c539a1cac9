"""Heralded building blocks: probabilistic CNOT, QND presence check, partial Bell analyzer.

The CNOT follows the two-splitter layout: the control meets one ancilla photon
of a |Phi+> pair on a linear PBS, the target meets the other on a circular PBS.
Detector D2 reads the spare linear-PBS output in the circular basis, D1 reads
the spare circular-PBS output in the linear basis. A quarter-wave plate on the
target input turns the circular splitter's controlled-Y into a controlled-NOT;
the remaining outcome-dependent Clifford corrections come from
:data:`CNOT_CORRECTIONS`, which :func:`derive_cnot_corrections` regenerates.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .analytics import NoiseParams
from .elements import (
    CIRCULAR,
    LINEAR,
    DetectorRecord,
    apply_beam_splitter,
    apply_local_unitary,
    apply_pbs,
    check_interference,
    detection_branches,
    gate,
)
from .errors import ContractViolation, UnsupportedInput
from .fock import FockState, ModeRegistry, choose, make_vacuum, photon_number_branches, tensor
from .sources import BellKind, GunParams, gun_branches

P_CNOT = 0.25
P_QND = 0.125

CNOT_PREPLATE = "S"

# (D1 polarization, D2 polarization) -> (control correction, target correction).
# Frozen output of derive_cnot_corrections() under the elements conventions.
CNOT_CORRECTIONS: dict[tuple[str, str], tuple[str, str]] = {
    ("H", "L"): ("I", "Sdg"),
    ("H", "R"): ("Z", "Sdg"),
    ("V", "L"): ("I", "X.Sdg"),
    ("V", "R"): ("Z", "X.Sdg"),
}

CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

_CONTROL_CANDIDATES = ("I", "Z", "S", "Sdg")
_TARGET_CANDIDATES = tuple(
    p if s == "I" else (s if p == "I" else f"{p}.{s}")
    for p in ("I", "X", "Y", "Z")
    for s in ("I", "S", "Sdg")
)


@dataclass(frozen=True)
class HeraldOutcome:
    success: bool
    records: tuple[DetectorRecord, ...]
    branch_probability: float
    post_state: FockState
    corrections_applied: tuple[tuple[str, str], ...] = ()
    pattern: str = ""


def _require_single_photon(state: FockState, *modes: str) -> None:
    for m in modes:
        if state.mode_counts(m) != {1}:
            raise ContractViolation(f"mode {m!r} must hold exactly one photon (QND-screen it first)")


# ---------------------------------------------------------------------
# Probabilistic CNOT
# ---------------------------------------------------------------------
class _Key:
    """Hashable wrapper so exhaustive branch lists can be memoized."""

    __slots__ = ("state", "_key")

    def __init__(self, state: FockState):
        self.state = state
        self._key = (state.registry, state.n_max, tuple(sorted(state.terms.items())))

    def __hash__(self):
        return hash(self._key)

    def __eq__(self, other):
        return self._key == other._key


def heralded_cnot_branches(
    state: FockState,
    control: str,
    target: str,
    gun: GunParams = GunParams(),
    eta: float = 1.0,
    corrections: dict | None = None,
) -> list[HeraldOutcome]:
    """Every fine-grained outcome of one CNOT attempt, with exact probabilities.

    Success means one click in exactly one bucket of each herald detector and one
    photon left in each of the control and target outputs (a false herald from
    a doubly occupied detector leaves an output empty and is rejected).
    ``corrections=None`` uses :data:`CNOT_CORRECTIONS`; pass ``{}`` for raw maps.
    """
    _require_single_photon(state, control, target)
    table = CNOT_CORRECTIONS if corrections is None else corrections
    frozen = tuple(sorted(table.items()))
    return list(_cnot_branches_cached(_Key(state), control, target, gun, float(eta), frozen))


@functools.lru_cache(maxsize=4096)
def _cnot_branches_cached(key: _Key, control, target, gun, eta, table) -> tuple[HeraldOutcome, ...]:
    state = key.state
    table = dict(table)
    if gun.emitted_kind is not BellKind.PHI_PLUS:
        raise ContractViolation("the CNOT ancilla must be a |Phi+> pair")
    anc_c, anc_t = f"{control}.anc", f"{target}.anc"
    anc_reg = ModeRegistry([(anc_c, gun.freq_pair[0]), (anc_t, gun.freq_pair[1])])
    base = tensor(state, make_vacuum(anc_reg, state.n_max))
    out = []
    for p_gun, _fired, s in gun_branches(base, anc_c, anc_t, gun):
        s = apply_local_unitary(s, target, CNOT_PREPLATE)
        s = apply_pbs(s, control, anc_c, LINEAR)
        s = apply_pbs(s, target, anc_t, CIRCULAR)
        for d2 in detection_branches(s, anc_c, CIRCULAR, eta):
            for d1 in detection_branches(d2.state, anc_t, LINEAR, eta):
                post = d1.state.drop_modes([anc_c, anc_t])
                heralded = d1.record.single and d2.record.single
                occupied = post.mode_counts(control) == {1} and post.mode_counts(target) == {1}
                success = heralded and occupied
                key_pols = (d1.record.resolved_pol, d2.record.resolved_pol)
                applied: tuple = ()
                if success and key_pols in table:
                    cc, ct = table[key_pols]
                    post = apply_local_unitary(post, control, cc)
                    post = apply_local_unitary(post, target, ct)
                    applied = ((control, cc), (target, ct))
                pattern = f"D1={key_pols[0] or '-'}/D2={key_pols[1] or '-'}"
                out.append(
                    HeraldOutcome(
                        success,
                        (d1.record, d2.record),
                        p_gun * d2.probability * d1.probability,
                        post,
                        applied,
                        pattern,
                    )
                )
    return tuple(out)


def heralded_cnot(
    state: FockState,
    control: str,
    target: str,
    gun: GunParams,
    eta: float,
    rng: np.random.Generator,
) -> HeraldOutcome:
    """Sample one herald pattern of the CNOT and return its outcome."""
    branches = heralded_cnot_branches(state, control, target, gun, eta)
    return branches[choose([b.branch_probability for b in branches], rng)]


def cnot_raw_maps(eta: float = 1.0) -> dict[tuple[str, str], np.ndarray]:
    """Uncorrected 4x4 maps (basis HH, HV, VH, VV) for each accepted herald pattern."""
    reg = ModeRegistry([("c", "w1"), ("t", "w2")])
    maps: dict[tuple[str, str], np.ndarray] = {}
    for col, (x, y) in enumerate(itertools.product("HV", "HV")):
        inp = FockState(reg, {_qubit_occ(x, y): 1.0})
        for b in heralded_cnot_branches(inp, "c", "t", GunParams(), eta, corrections={}):
            if not b.success:
                continue
            key = (b.records[0].resolved_pol, b.records[1].resolved_pol)
            m = maps.setdefault(key, np.zeros((4, 4), dtype=complex))
            amp = np.sqrt(b.branch_probability)
            for (cx, cy), row in _QUBIT_ROWS.items():
                m[row, col] += amp * b.post_state.terms.get(_qubit_occ(cx, cy), 0)
    return maps


_QUBIT_ROWS = {(x, y): 2 * "HV".index(x) + "HV".index(y) for x in "HV" for y in "HV"}


def _qubit_occ(x: str, y: str) -> tuple[int, int, int, int]:
    return (int(x == "H"), int(x == "V"), int(y == "H"), int(y == "V"))


def derive_cnot_corrections() -> dict[tuple[str, str], tuple[str, str]]:
    """Search local Clifford corrections making every accepted pattern an exact CNOT."""
    table = {}
    for key, m in sorted(cnot_raw_maps().items()):
        for cc, ct in itertools.product(_CONTROL_CANDIDATES, _TARGET_CANDIDATES):
            fixed = np.kron(gate(cc), gate(ct)) @ m
            lam = fixed[0, 0]
            if abs(abs(lam) - 0.25) < 1e-12 and np.allclose(fixed, lam * CNOT_MATRIX, atol=1e-12):
                table[key] = (cc, ct)
                break
        else:
            raise ContractViolation(f"no local correction turns pattern {key} into a CNOT")
    return table


# ---------------------------------------------------------------------
# Single-photon QND presence check (black box)
# ---------------------------------------------------------------------
def qnd_presence_branches(
    state: FockState,
    mode: str,
    eta: float = 1.0,
    p_s: float = 1.0,
    p_qnd: float = P_QND,
) -> list[HeraldOutcome]:
    """Herald a photon in ``mode`` without touching its polarization.

    The device consumes two gun firings and four detections per attempt, so a
    present photon is heralded with probability ``p_qnd * eta**4 * p_s**2``.
    """
    if max(state.mode_counts(mode)) > 1:
        raise UnsupportedInput(f"QND input in {mode!r} holds more than one photon")
    q = p_qnd * eta**4 * p_s**2
    out = []
    for br in photon_number_branches(state, mode):
        if br.count == 1:
            if q > 0:
                out.append(HeraldOutcome(True, (), br.probability * q, br.state, (), "present"))
            if q < 1:
                out.append(HeraldOutcome(False, (), br.probability * (1 - q), br.state, (), "silent"))
        else:
            out.append(HeraldOutcome(False, (), br.probability, br.state, (), "silent"))
    return out


def qnd_presence(state: FockState, mode: str, eta: float, rng: np.random.Generator, p_s: float = 1.0, p_qnd: float = P_QND) -> HeraldOutcome:
    branches = qnd_presence_branches(state, mode, eta, p_s, p_qnd)
    return branches[choose([b.branch_probability for b in branches], rng)]


# ---------------------------------------------------------------------
# Partial Bell analyzer
# ---------------------------------------------------------------------
PSI_PLUS = "psi+"
PSI_MINUS = "psi-"
FAIL = "fail"


def _classify(ra: DetectorRecord, rb: DetectorRecord) -> str:
    if ra.single and rb.single and {ra.resolved_pol, rb.resolved_pol} == {"H", "V"}:
        return PSI_MINUS
    both_a = all(ra.bucket_clicks) and not rb.clicked
    both_b = all(rb.bucket_clicks) and not ra.clicked
    if both_a or both_b:
        return PSI_PLUS
    return FAIL


def bell_analyzer_branches(state: FockState, mode_a: str, mode_b: str, eta: float = 1.0) -> list[tuple[str, HeraldOutcome]]:
    """50/50 splitter followed by a polarization-resolving detector pair on each output.

    |Psi-> leaves one photon per output with crossed polarizations; |Psi+> bunches
    into one output with crossed polarizations; |Phi+-> bunches with equal
    polarizations and can only fire one bucket, so it is never identified.
    """
    check_interference(state, mode_a, mode_b)
    _require_single_photon(state, mode_a, mode_b)
    s = apply_beam_splitter(state, mode_a, mode_b)
    out = []
    for da in detection_branches(s, mode_a, LINEAR, eta):
        for db in detection_branches(da.state, mode_b, LINEAR, eta):
            verdict = _classify(da.record, db.record)
            outcome = HeraldOutcome(
                verdict != FAIL,
                (da.record, db.record),
                da.probability * db.probability,
                db.state,
                (),
                verdict,
            )
            out.append((verdict, outcome))
    return out


def bell_analyzer(state: FockState, mode_a: str, mode_b: str, eta: float, rng: np.random.Generator) -> tuple[str, HeraldOutcome]:
    branches = bell_analyzer_branches(state, mode_a, mode_b, eta)
    return branches[choose([b[1].branch_probability for b in branches], rng)]


def outcome_probabilities(branches) -> dict[str, float]:
    """Collapse Bell-analyzer branches to ``{verdict: probability}``."""
    totals: dict[str, float] = {}
    for verdict, o in branches:
        totals[verdict] = totals.get(verdict, 0.0) + o.branch_probability
    return totals


def cnot_gun(params: NoiseParams, freq_pair=("w1", "w2")) -> GunParams:
    return GunParams(params.p_s, BellKind.PHI_PLUS, tuple(freq_pair))
