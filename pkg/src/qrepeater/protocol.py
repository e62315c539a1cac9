"""Repeater protocol: pair distribution, purification, swapping and the chain harness.

Every probabilistic stage is enumerated exactly (``*_paths`` functions walk the
branch tree); the Monte Carlo harness follows one branch per stage, drawn from
the exact branch probabilities with a per-trial random stream.

Success accounting follows the purification rate formula: a purified pair
counts only when the purifier heralds acceptance *and* neither input pair was
dephased in transit. A run where both inputs were dephased is still accepted by
the circuit (the two phase flips cancel on the kept pair) and shows up in the
``accepted`` counters and the fidelity statistics, not in ``usable``.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np

from . import analytics
from .analytics import ComponentTally, NoiseParams
from .elements import LINEAR, ChannelParams, apply_local_unitary, channel_transit_branches, detection_branches, gate
from .errors import ConfigurationError, ContractViolation, TopologyError
from .fock import FockState, MixedState, ModeRegistry, choose, fidelity, make_vacuum, tensor
from .gates import (
    FAIL,
    _Key,
    bell_analyzer_branches,
    heralded_cnot_branches,
    qnd_presence_branches,
)
from .sources import BELL_ROTATIONS, BellKind, GunParams, bell_state, gun_branches

FREQ_A, FREQ_B = "w1", "w2"

# Verdict of the partial Bell analyzer -> correction on the far-right photon.
# Frozen output of derive_swap_corrections().
SWAP_CORRECTIONS: dict[str, str] = {
    "psi+": "X",
    "psi-": "Y",
}


@dataclass(frozen=True)
class ClassicalMessage:
    sender: str
    receiver: str
    payload: str
    round: int


@dataclass(frozen=True)
class Event:
    """One herald event; ``probability`` is conditional on the preceding events."""

    station: str
    component: str
    outcome: str
    probability: float


@dataclass(frozen=True)
class LinkPair:
    """A (possibly noisy) photon pair shared by two stations."""

    station_left: str
    station_right: str
    left_mode: str
    right_mode: str
    state: MixedState
    clean: bool = True
    provenance: tuple[ClassicalMessage, ...] = ()
    fidelity_cache: float = field(default=math.nan, compare=False)

    def __post_init__(self):
        reg = self.state.registry
        if set(reg.labels) != {self.left_mode, self.right_mode}:
            raise ContractViolation(f"pair registry {reg.labels} does not match its modes")
        object.__setattr__(self, "fidelity_cache", fidelity(self.state, target_state(reg, self.left_mode, self.right_mode)))

    @property
    def fidelity(self) -> float:
        return self.fidelity_cache


@functools.lru_cache(maxsize=1024)
def target_state(registry: ModeRegistry, left: str, right: str) -> FockState:
    """The |Phi+> every link aims for, on the pair's own registry."""
    return bell_state(registry, left, right, BellKind.PHI_PLUS)


def _require_ordered(pair: LinkPair) -> FockState:
    if len(pair.state.branches) != 1:
        raise ContractViolation("exact paths are walked per pure branch; split the mixture first")
    return pair.state.branches[0][1]


class Path(NamedTuple):
    """One leaf of an exhaustive protocol tree."""

    probability: float
    success: bool
    pair: LinkPair | None
    events: tuple[Event, ...]
    messages: tuple[ClassicalMessage, ...]


Picker = Callable[[list[tuple[float, object]]], Iterator[tuple[float, object]]]


def exhaustive(options):
    """Picker that follows every branch."""
    return iter(options)


def sampler(rng: np.random.Generator) -> Picker:
    """Picker that follows one branch drawn from its exact probability."""

    def pick(options):
        i = choose([p for p, _ in options], rng)
        return iter([options[i]])

    return pick


# ---------------------------------------------------------------------
# Distribution
# ---------------------------------------------------------------------
def distribute_paths(
    source: GunParams,
    channel: ChannelParams,
    pick: Picker = exhaustive,
    left: str = "A",
    right: str = "B",
    labels: tuple[str, str] = ("a", "b"),
    placement: str = "midpoint",
    source_station: str = "E",
) -> list[Path]:
    """Fire a gun and send the pair through the channel.

    The pair is rotated to |Phi+> at the source. ``placement`` selects which photon
    carries the dephasing flip: the right one unless the source sits at the right
    station.
    """
    tree = _distribution_tree(source, channel, left, right, tuple(labels), placement)
    paths = []
    for p_gun, (fired, leaves) in pick([(p, (f, lv)) for p, f, lv in tree]):
        ev_gun = Event(source_station, "gun", "fired" if fired else "misfire", p_gun)
        if not fired:
            paths.append(Path(p_gun, False, None, (ev_gun,), ()))
            continue
        for p_ch, (outcome, pair) in pick([(p, (o, pr)) for p, o, pr in leaves]):
            events = (ev_gun, Event(source_station, "channel", outcome, p_ch))
            paths.append(Path(p_gun * p_ch, pair is not None, pair, events, ()))
    return paths


@functools.lru_cache(maxsize=1024)
def _distribution_tree(source, channel, left, right, labels, placement):
    reg = ModeRegistry([(labels[0], source.freq_pair[0]), (labels[1], source.freq_pair[1])])
    far = labels[0] if placement == "right" else labels[1]
    tree = []
    for p_gun, fired, state in gun_branches(make_vacuum(reg), *labels, source):
        if not fired:
            tree.append((p_gun, False, ()))
            continue
        inverse = np.conj(gate(BELL_ROTATIONS[source.emitted_kind])).T
        state = apply_local_unitary(state, labels[1], inverse)
        leaves = []
        for tb in channel_transit_branches(state, channel, far):
            if not tb.survived:
                leaves.append((tb.probability, "lost", None))
                continue
            pair = LinkPair(left, right, labels[0], labels[1], MixedState.pure(tb.state), clean=not tb.dephased)
            leaves.append((tb.probability, "dephased" if tb.dephased else "clean", pair))
        tree.append((p_gun, True, tuple(leaves)))
    return tuple(tree)


def distribute_pair(source: GunParams, channel: ChannelParams, rng: np.random.Generator, **kwargs) -> LinkPair | None:
    (path,) = distribute_paths(source, channel, sampler(rng), **kwargs)
    return path.pair


# ---------------------------------------------------------------------
# Purification
# ---------------------------------------------------------------------
@functools.lru_cache(maxsize=4096)
def _qnd_cached(key: _Key, mode: str, eta: float, p_s: float, p_qnd: float):
    return tuple(qnd_presence_branches(key.state, mode, eta, p_s, p_qnd))


@functools.lru_cache(maxsize=4096)
def _detect_cached(key: _Key, mode: str, eta: float):
    return tuple(detection_branches(key.state, mode, LINEAR, eta))


def purify_paths(
    pair1: LinkPair,
    pair2: LinkPair,
    params: NoiseParams,
    pick: Picker = exhaustive,
    include_qnd: bool = True,
    round_base: int = 0,
) -> list[Path]:
    """Bilateral CNOT purification of ``pair1`` (control) with ``pair2`` (target).

    The left station QND-screens its control photon, each station runs one
    probabilistic CNOT, both read their target photon in H/V and the pair is kept
    on a parallel coincidence.
    """
    if (pair1.station_left, pair1.station_right) != (pair2.station_left, pair2.station_right):
        raise TopologyError("purification needs two pairs spanning the same stations")
    sl, sr = pair1.station_left, pair1.station_right
    c_l, c_r, t_l, t_r = pair1.left_mode, pair1.right_mode, pair2.left_mode, pair2.right_mode
    joint = tensor(_require_ordered(pair1), _require_ordered(pair2))
    reg = joint.registry
    gun_l = GunParams(params.p_s, BellKind.PHI_PLUS, (reg.freq(c_l), reg.freq(t_l)))
    gun_r = GunParams(params.p_s, BellKind.PHI_PLUS, (reg.freq(c_r), reg.freq(t_r)))
    p_qnd = params.p_qnd if include_qnd else 1.0
    clean = pair1.clean and pair2.clean
    eta = params.eta
    paths = []

    qnd = _qnd_cached(_Key(joint), c_l, eta, params.p_s, p_qnd)
    for p_q, q in pick([(b.branch_probability, b) for b in qnd]):
        events = (Event(sl, "qnd", q.pattern, p_q),)
        if not q.success:
            paths.append(Path(p_q, False, None, events, ()))
            continue
        left = heralded_cnot_branches(q.post_state, c_l, t_l, gun_l, eta)
        for p_l, cl in pick([(b.branch_probability, b) for b in left]):
            ev_l = events + (Event(sl, "cnot", _cnot_outcome(cl), p_l),)
            msg_l = ClassicalMessage(sl, sr, f"cnot:{cl.pattern}", round_base)
            if not cl.success:
                paths.append(Path(p_q * p_l, False, None, ev_l, (msg_l,)))
                continue
            right = heralded_cnot_branches(cl.post_state, c_r, t_r, gun_r, eta)
            for p_r, cr in pick([(b.branch_probability, b) for b in right]):
                ev_r = ev_l + (Event(sr, "cnot", _cnot_outcome(cr), p_r),)
                msgs = (msg_l, ClassicalMessage(sr, sl, f"cnot:{cr.pattern}", round_base))
                p_sofar = p_q * p_l * p_r
                if not cr.success:
                    paths.append(Path(p_sofar, False, None, ev_r, msgs))
                    continue
                for p_a, da in pick([(b.probability, b) for b in _detect_cached(_Key(cr.post_state), t_l, eta)]):
                    for p_b, db in pick([(b.probability, b) for b in _detect_cached(_Key(da.state), t_r, eta)]):
                        ra, rb = da.record, db.record
                        parallel = ra.single and rb.single and ra.resolved_pol == rb.resolved_pol
                        verdict = "parallel" if parallel else ("antiparallel" if ra.single and rb.single else "missing")
                        ev = ev_r + (
                            Event(sl, "target", ra.resolved_pol or ("none" if not ra.clicked else "double"), p_a),
                            Event(sr, "target", rb.resolved_pol or ("none" if not rb.clicked else "double"), p_b),
                        )
                        all_msgs = msgs + (
                            ClassicalMessage(sl, sr, f"target:{ra.resolved_pol}", round_base + 1),
                            ClassicalMessage(sr, sl, f"target:{rb.resolved_pol}", round_base + 1),
                        )
                        prob = p_sofar * p_a * p_b
                        if not parallel:
                            paths.append(Path(prob, False, None, ev + (Event(sl, "purifier", verdict, 1.0),), all_msgs))
                            continue
                        kept = db.state.drop_modes([t_l, t_r])
                        pair = LinkPair(
                            sl, sr, c_l, c_r, MixedState.pure(kept), clean=clean,
                            provenance=pair1.provenance + pair2.provenance + all_msgs,
                        )
                        paths.append(Path(prob, True, pair, ev + (Event(sl, "purifier", "accepted", 1.0),), all_msgs))
    return paths


def _cnot_outcome(h) -> str:
    return f"{'ok' if h.success else 'fail'}[{h.pattern}]"


def purify(pair1: LinkPair, pair2: LinkPair, params: NoiseParams, rng: np.random.Generator, include_qnd: bool = True) -> tuple[LinkPair | None, ComponentTally]:
    (path,) = purify_paths(pair1, pair2, params, sampler(rng), include_qnd)
    return path.pair, analytics.PURIFIER_TALLY


# ---------------------------------------------------------------------
# Swapping
# ---------------------------------------------------------------------
def swap_paths(left: LinkPair, right: LinkPair, params: NoiseParams, pick: Picker = exhaustive, round_base: int = 0, corrections: dict | None = None) -> list[Path]:
    """Partial Bell measurement on the inner photons; on success the far-right
    station applies the verdict's correction after the middle station reports."""
    if left.station_right != right.station_left:
        raise TopologyError(f"cannot swap {left.station_left}-{left.station_right} with {right.station_left}-{right.station_right}")
    table = SWAP_CORRECTIONS if corrections is None else corrections
    mid = left.station_right
    inner = (left.right_mode, right.left_mode)
    tree = _swap_tree(
        _Key(_require_ordered(left)), _Key(_require_ordered(right)), inner, right.right_mode,
        params.eta, tuple(sorted(table.items())),
    )
    paths = []
    for p, (verdict, kept) in pick([(p, (v, k)) for p, v, k in tree]):
        events = (Event(mid, "swapper", verdict, p),)
        msg = ClassicalMessage(mid, right.station_right, f"bell:{verdict}", round_base)
        if kept is None:
            paths.append(Path(p, False, None, events, (msg,)))
            continue
        pair = LinkPair(
            left.station_left, right.station_right, left.left_mode, right.right_mode,
            MixedState.pure(kept), clean=left.clean and right.clean,
            provenance=left.provenance + right.provenance + (msg,),
        )
        paths.append(Path(p, True, pair, events, (msg,)))
    return paths


@functools.lru_cache(maxsize=4096)
def _swap_tree(lkey: _Key, rkey: _Key, inner, far_mode, eta, table):
    table = dict(table)
    joint = tensor(lkey.state, rkey.state)
    tree = []
    for verdict, h in bell_analyzer_branches(joint, *inner, eta):
        if verdict == FAIL:
            tree.append((h.branch_probability, verdict, None))
            continue
        kept = h.post_state.drop_modes(inner)
        if verdict in table:
            kept = apply_local_unitary(kept, far_mode, table[verdict])
        tree.append((h.branch_probability, verdict, kept))
    return tuple(tree)


def swap(left: LinkPair | None, right: LinkPair | None, params: NoiseParams, rng: np.random.Generator) -> LinkPair | None:
    if left is None or right is None:
        return None
    (path,) = swap_paths(left, right, params, sampler(rng))
    return path.pair


def derive_swap_corrections() -> dict[str, str]:
    """Find, per verdict, the far-end Pauli that maps the swapped pair to |Phi+>."""
    params = NoiseParams(eta=1.0)
    left, right = ideal_pair("A", "R", ("A.l", "A.r"), (FREQ_A, FREQ_B)), ideal_pair("R", "B", ("B.l", "B.r"), (FREQ_B, FREQ_A))
    table: dict[str, str] = {}
    for path in swap_paths(left, right, params, corrections={}):
        if not path.success:
            continue
        verdict = path.events[0].outcome
        state = path.pair.state.branches[0][1]
        tgt = target_state(state.registry, "A.l", "B.r")
        for tag in ("I", "X", "Z", "Y", "Z.X", "X.Z"):
            if abs(abs(tgt.inner(apply_local_unitary(state, "B.r", tag))) - 1) < 1e-12:
                if table.setdefault(verdict, tag) != tag:
                    raise ContractViolation(f"verdict {verdict} needs different corrections per branch")
                break
        else:
            raise ContractViolation(f"no Pauli correction for verdict {verdict}")
    return table


def ideal_pair(left: str, right: str, labels: tuple[str, str], freqs: tuple[str, str] = (FREQ_A, FREQ_B)) -> LinkPair:
    reg = ModeRegistry([(labels[0], freqs[0]), (labels[1], freqs[1])])
    return LinkPair(left, right, labels[0], labels[1], MixedState.pure(bell_state(reg, *labels)))


# ---------------------------------------------------------------------
# Exact single-link probability
# ---------------------------------------------------------------------
def link_paths(
    link: int,
    left: str,
    right: str,
    params: NoiseParams,
    pick: Picker = exhaustive,
    include_qnd: bool = True,
    placement: str = "midpoint",
) -> list[Path]:
    """Two distributions followed by one purification on link ``link``.

    Orientation alternates with the link index so that every splitter (CNOT
    ancillas, purifier target photons, swapper inputs) sees equal frequencies.
    """
    fa, fb = (FREQ_A, FREQ_B) if link % 2 == 0 else (FREQ_B, FREQ_A)
    channel = ChannelParams(params.gamma, params.zeta)
    src1 = GunParams(params.p_s, BellKind.PHI_PLUS, (fa, fb))
    src2 = GunParams(params.p_s, BellKind.PHI_PLUS, (fb, fa))
    out = []
    for d1 in distribute_paths(src1, channel, pick, left, right, (f"L{link}.c.l", f"L{link}.c.r"), placement, f"E{link}.1"):
        if not d1.success:
            out.append(d1)
            continue
        for d2 in distribute_paths(src2, channel, pick, left, right, (f"L{link}.t.l", f"L{link}.t.r"), placement, f"E{link}.2"):
            head = d1.probability * d2.probability
            if not d2.success:
                out.append(Path(head, False, None, d1.events + d2.events, ()))
                continue
            for p in purify_paths(d1.pair, d2.pair, params, pick, include_qnd, round_base=0):
                out.append(Path(head * p.probability, p.success, p.pair, d1.events + d2.events + p.events, p.messages))
    return out


def exact_link_probabilities(params: NoiseParams, include_qnd: bool = True) -> dict[str, float]:
    """Exact accepted/usable probabilities for one purified link by full enumeration."""
    accepted = usable = total = 0.0
    for path in link_paths(0, "A", "B", params, exhaustive, include_qnd):
        total += path.probability
        if path.success:
            accepted += path.probability
            if path.pair.clean:
                usable += path.probability
    return {"total": total, "accepted": accepted, "usable": usable}


# ---------------------------------------------------------------------
# Monte Carlo harness
# ---------------------------------------------------------------------
SEED_ENV = "QREPEATER_SEED"


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial: ``SeedSequence(seed, spawn_key=(trial,))``.

    This is the child a ``SeedSequence(seed).spawn`` call would hand out at
    position ``trial``, so streams do not depend on evaluation order.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


@dataclass(frozen=True)
class ChainConfig:
    n_links: int = 1
    params: NoiseParams = NoiseParams()
    trials: int = 10_000
    seed: int = 0
    table1_convention: bool = False
    placement: str = "midpoint"

    def __post_init__(self):
        if self.n_links < 1:
            raise ConfigurationError("n_links must be >= 1")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigurationError("seed must be unsigned")
        if self.placement not in ("midpoint", "left", "right"):
            raise ConfigurationError(f"unknown source placement {self.placement!r}")


def station_names(n_links: int) -> list[str]:
    return ["Alice"] + [f"R{i}" for i in range(1, n_links)] + ["Bob"]


@dataclass
class TrialResult:
    success: bool
    fidelity: float | None
    links_accepted: int
    links_usable: int
    swap_attempts: int
    swap_successes: int
    events: list[Event]
    messages_ok: bool


def run_trial(config: ChainConfig, trial: int) -> TrialResult:
    rng = trial_rng(config.seed, trial)
    pick = sampler(rng)
    stations = station_names(config.n_links)
    include_qnd = not config.table1_convention
    events: list[Event] = []
    links: list[LinkPair | None] = []
    usable_all = True
    accepted = usable = 0
    messages_ok = True
    for k in range(config.n_links):
        (path,) = link_paths(k, stations[k], stations[k + 1], config.params, pick, include_qnd, config.placement)
        events.extend(path.events)
        if path.success:
            accepted += 1
            usable += path.pair.clean
            messages_ok &= _consumed_all(path.pair, stations[k], stations[k + 1])
        usable_all &= path.success and path.pair.clean
        links.append(path.pair)
    current = links[0]
    swap_attempts = swap_successes = 0
    for k in range(1, config.n_links):
        nxt = links[k]
        if current is None or nxt is None:
            current = None
            continue
        swap_attempts += 1
        (path,) = swap_paths(current, nxt, config.params, pick, round_base=2)
        events.extend(path.events)
        if path.success:
            swap_successes += 1
            messages_ok &= any(m.payload.startswith("bell:") for m in path.pair.provenance)
        current = path.pair
    success = usable_all and current is not None
    fid = current.fidelity if current is not None else None
    return TrialResult(success, fid, accepted, usable, swap_attempts, swap_successes, events, messages_ok)


def _consumed_all(pair: LinkPair, left: str, right: str) -> bool:
    """An accepted purification must have seen both stations' CNOT and target reports."""
    need = {(left, "cnot"), (right, "cnot"), (left, "target"), (right, "target")}
    got = {(m.sender, m.payload.split(":")[0]) for m in pair.provenance}
    return need <= got


@dataclass
class RateReport:
    config: dict
    trials: int
    successes: int
    success_frequency: float
    standard_error: float
    ci_low: float
    ci_high: float
    analytic_success_probability: float
    z_score: float
    within_3_sigma: bool
    purify: dict
    swap: dict
    mean_fidelity: float | None
    tally_per_trial: dict
    expected_components: dict
    empirical_components: dict
    causality_ok: bool

    SCHEMA = "qrepeater.rate_report/1"

    def to_dict(self) -> dict:
        return {"schema": self.SCHEMA, **asdict(self)}


def binomial_summary(successes: int, trials: int, p: float) -> dict:
    """Frequency, its 3-sigma band (normal approximation) and z-score against ``p``."""
    freq = successes / trials
    se = math.sqrt(max(freq * (1 - freq), 0.0) / trials)
    sd_model = math.sqrt(p * (1 - p) / trials)
    z = (freq - p) / sd_model if sd_model > 0 else (0.0 if freq == p else math.inf)
    return {
        "frequency": freq,
        "standard_error": se,
        "ci_low": max(0.0, freq - 3 * se),
        "ci_high": min(1.0, freq + 3 * se),
        "z_score": z,
        "within_3_sigma": abs(z) <= 3.0,
    }


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def run_chain(config: ChainConfig, workers: int = 1, event_sink: list | None = None) -> RateReport:
    """Monte Carlo over independent trials; results are identical for any ``workers``."""
    chunks = _chunks(config.trials, max(1, workers) * 4)
    if workers <= 1:
        parts = [_run_range(config, r) for r in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: _run_range(config, r), chunks))
    results = [res for part in parts for res in part]

    if event_sink is not None:
        for i, res in enumerate(results):
            event_sink.extend((i, e) for e in res.events)

    n = config.trials
    include_qnd = not config.table1_convention
    params = config.params
    successes = sum(r.success for r in results)
    p_chain = analytics.chain_success_probability(params, config.n_links, include_qnd)
    summary = binomial_summary(successes, n, p_chain)

    link_attempts = n * config.n_links
    accepted = sum(r.links_accepted for r in results)
    usable = sum(r.links_usable for r in results)
    swap_attempts = sum(r.swap_attempts for r in results)
    swap_successes = sum(r.swap_successes for r in results)
    fids = [r.fidelity for r in results if r.success]

    n_pur_hat = _ratio(link_attempts, usable)
    n_swap_hat = _ratio(swap_attempts, swap_successes)
    expected = analytics.expected_components(params, include_qnd)
    tally = analytics.tally_resources("chain", config.n_links)

    return RateReport(
        config={
            "n_links": config.n_links,
            "trials": config.trials,
            "seed": config.seed,
            "table1_convention": config.table1_convention,
            "placement": config.placement,
            "params": asdict(params),
        },
        trials=n,
        successes=successes,
        success_frequency=summary["frequency"],
        standard_error=summary["standard_error"],
        ci_low=summary["ci_low"],
        ci_high=summary["ci_high"],
        analytic_success_probability=p_chain,
        z_score=summary["z_score"],
        within_3_sigma=summary["within_3_sigma"],
        purify={
            "attempts": link_attempts,
            "accepted": accepted,
            "usable": usable,
            "frequency": usable / link_attempts,
            "analytic": analytics.p_pur(params, include_qnd),
        },
        swap={
            "attempts": swap_attempts,
            "successes": swap_successes,
            "frequency": _ratio(swap_successes, swap_attempts),
            "analytic": analytics.p_swap(params.eta),
        },
        mean_fidelity=math.fsum(fids) / len(fids) if fids else None,
        tally_per_trial={"guns": tally.guns, "detectors": tally.detectors},
        expected_components={
            "n_pur": expected.n_pur,
            "n_swap": expected.n_swap,
            "n_total": expected.n_total,
            "convention": analytics.WITHOUT_QND if config.table1_convention else analytics.WITH_QND,
        },
        empirical_components={
            "n_pur": n_pur_hat,
            "n_swap": n_swap_hat,
            "n_total": 2 * n_pur_hat * n_swap_hat if n_pur_hat and n_swap_hat else None,
        },
        causality_ok=all(r.messages_ok for r in results),
    )


def _chunks(n: int, k: int) -> list[range]:
    size = max(1, math.ceil(n / k))
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def _run_range(config: ChainConfig, r: range) -> list[TrialResult]:
    return [run_trial(config, i) for i in r]


# ---------------------------------------------------------------------
# Component-level estimators on ideal inputs
# ---------------------------------------------------------------------
def estimate_swap_rate(params: NoiseParams, trials: int, seed: int) -> dict:
    """Swap two ideal |Phi+> pairs repeatedly; compare with eta^2 / 2."""
    left = ideal_pair("A", "R", ("A.l", "A.r"), (FREQ_A, FREQ_B))
    right = ideal_pair("R", "B", ("B.l", "B.r"), (FREQ_B, FREQ_A))
    hits = 0
    for i in range(trials):
        (path,) = swap_paths(left, right, params, sampler(trial_rng(seed, i)))
        hits += path.success
    return {"trials": trials, "successes": hits, **binomial_summary(hits, trials, analytics.p_swap(params.eta))}


def estimate_purify_rate(params: NoiseParams, trials: int, seed: int, include_qnd: bool = True) -> dict:
    """Purify two ideal |Phi+> pairs repeatedly; compare with the exact enumeration."""
    p1 = ideal_pair("A", "B", ("c.l", "c.r"), (FREQ_A, FREQ_B))
    p2 = ideal_pair("A", "B", ("t.l", "t.r"), (FREQ_B, FREQ_A))
    exact = math.fsum(p.probability for p in purify_paths(p1, p2, params, exhaustive, include_qnd) if p.success)
    hits = 0
    for i in range(trials):
        (path,) = purify_paths(p1, p2, params, sampler(trial_rng(seed, i)), include_qnd)
        hits += path.success
    return {"trials": trials, "successes": hits, "exact": exact, **binomial_summary(hits, trials, exact)}


def format_event_log(events: list[tuple[int, Event]]) -> str:
    lines = ["trial,station,component,outcome,probability"]
    for trial, e in events:
        lines.append(f"{trial},{e.station},{e.component},{e.outcome},{e.probability:.12g}")
    return "\n".join(lines) + "\n"
