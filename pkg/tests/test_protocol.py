import json
import math

import numpy as np
import pytest

from qrepeater.analytics import NoiseParams, order_of_magnitude, p_pur
from qrepeater.elements import ChannelParams
from qrepeater.errors import ConfigurationError, TopologyError
from qrepeater.fock import MixedState, ModeRegistry, fidelity
from qrepeater.protocol import (
    FREQ_A,
    FREQ_B,
    SWAP_CORRECTIONS,
    ChainConfig,
    LinkPair,
    derive_swap_corrections,
    distribute_pair,
    distribute_paths,
    estimate_purify_rate,
    estimate_swap_rate,
    exact_link_probabilities,
    exhaustive,
    format_event_log,
    ideal_pair,
    link_paths,
    purify,
    purify_paths,
    run_chain,
    swap,
    swap_paths,
    target_state,
    trial_rng,
)
from qrepeater.sources import BellKind, GunParams, bell_state

IDEAL = NoiseParams(p_s=1.0, eta=1.0, gamma=0.0, zeta=1.0)


def pair(left, right, labels, freqs, kind=BellKind.PHI_PLUS, clean=True):
    reg = ModeRegistry([(labels[0], freqs[0]), (labels[1], freqs[1])])
    return LinkPair(left, right, labels[0], labels[1], MixedState.pure(bell_state(reg, *labels, kind)), clean=clean)


def success_probability(paths):
    return math.fsum(p.probability for p in paths if p.success)


# ---------------------------------------------------------------------
# Distribution
# ---------------------------------------------------------------------
def test_distribution_branches():
    paths = distribute_paths(GunParams(0.9), ChannelParams(0.5, math.sqrt(0.5)))
    assert math.fsum(p.probability for p in paths) == pytest.approx(1.0)
    assert success_probability(paths) == pytest.approx(0.9 * math.sqrt(0.5))
    clean = [p for p in paths if p.success and p.pair.clean]
    dirty = [p for p in paths if p.success and not p.pair.clean]
    assert clean[0].pair.fidelity == pytest.approx(1.0)
    assert dirty[0].pair.fidelity == pytest.approx(0.0)


@pytest.mark.parametrize("kind", list(BellKind))
def test_sources_are_rotated_to_phi_plus(kind):
    paths = distribute_paths(GunParams(1.0, kind), ChannelParams(0.0, 1.0))
    (only,) = paths
    assert only.pair.fidelity == pytest.approx(1.0)


@pytest.mark.parametrize("placement", ["midpoint", "left", "right"])
def test_placement_keeps_probabilities(placement):
    paths = distribute_paths(GunParams(0.9), ChannelParams(0.5, 0.7), placement=placement)
    assert success_probability(paths) == pytest.approx(0.9 * 0.7)


def test_distribute_pair_sampled():
    got = distribute_pair(GunParams(1.0), ChannelParams(0.0, 1.0), np.random.default_rng(0))
    assert got is not None and got.fidelity == pytest.approx(1.0)


# ---------------------------------------------------------------------
# Purification
# ---------------------------------------------------------------------
def ideal_inputs():
    return (
        pair("A", "B", ("c.l", "c.r"), (FREQ_A, FREQ_B)),
        pair("A", "B", ("t.l", "t.r"), (FREQ_B, FREQ_A)),
    )


def test_ideal_purification_probability_and_fidelity():
    p1, p2 = ideal_inputs()
    paths = purify_paths(p1, p2, IDEAL, exhaustive, include_qnd=True)
    assert math.fsum(p.probability for p in paths) == pytest.approx(1.0, abs=1e-12)
    assert success_probability(paths) == pytest.approx(0.125 / 16, abs=1e-14)
    for p in paths:
        if p.success:
            assert p.pair.fidelity == pytest.approx(1.0, abs=1e-12)


def test_purification_without_qnd_factor():
    p1, p2 = ideal_inputs()
    assert success_probability(purify_paths(p1, p2, IDEAL, include_qnd=False)) == pytest.approx(1 / 16)


def test_single_phase_flip_passes_undetected():
    # H/V target readout detects bit flips; a dephased input is accepted as often
    # as a clean one and leaves |Phi-> on the kept pair.
    p1 = pair("A", "B", ("c.l", "c.r"), (FREQ_A, FREQ_B), BellKind.PHI_MINUS, clean=False)
    _, p2 = ideal_inputs()
    paths = purify_paths(p1, p2, IDEAL, include_qnd=False)
    assert success_probability(paths) == pytest.approx(1 / 16)
    for p in paths:
        if p.success:
            assert p.pair.fidelity == pytest.approx(0.0, abs=1e-12)
            assert not p.pair.clean


def test_two_phase_flips_cancel():
    p1 = pair("A", "B", ("c.l", "c.r"), (FREQ_A, FREQ_B), BellKind.PHI_MINUS, clean=False)
    p2 = pair("A", "B", ("t.l", "t.r"), (FREQ_B, FREQ_A), BellKind.PHI_MINUS, clean=False)
    for p in purify_paths(p1, p2, IDEAL, include_qnd=False):
        if p.success:
            assert p.pair.fidelity == pytest.approx(1.0, abs=1e-12)


def test_bit_flip_is_rejected():
    p1 = pair("A", "B", ("c.l", "c.r"), (FREQ_A, FREQ_B), BellKind.PSI_PLUS)
    _, p2 = ideal_inputs()
    assert success_probability(purify_paths(p1, p2, IDEAL, include_qnd=False)) == pytest.approx(0.0, abs=1e-14)


def test_purify_needs_matching_stations():
    p1, _ = ideal_inputs()
    p2 = pair("A", "C", ("t.l", "t.r"), (FREQ_B, FREQ_A))
    with pytest.raises(TopologyError):
        purify_paths(p1, p2, IDEAL)


def test_purify_sampled_reports_tally():
    p1, p2 = ideal_inputs()
    _, tally = purify(p1, p2, IDEAL, np.random.default_rng(0))
    assert (tally.guns, tally.detectors) == (6, 10)


@pytest.mark.parametrize(
    "params",
    [
        NoiseParams(),
        NoiseParams(eta=0.8),
        NoiseParams(p_s=0.7, eta=0.9, gamma=0.2, zeta=0.5),
        IDEAL,
    ],
)
@pytest.mark.parametrize("include_qnd", [True, False])
def test_exact_link_enumeration_reproduces_rate_formula(params, include_qnd):
    probs = exact_link_probabilities(params, include_qnd)
    assert probs["total"] == pytest.approx(1.0, abs=1e-12)
    assert probs["usable"] == pytest.approx(p_pur(params, include_qnd), rel=1e-12)
    assert probs["accepted"] >= probs["usable"]


def test_odd_links_use_reversed_frequencies():
    even = math.fsum(p.probability for p in link_paths(0, "A", "B", IDEAL) if p.success)
    odd = math.fsum(p.probability for p in link_paths(1, "A", "B", IDEAL) if p.success)
    assert odd == pytest.approx(even)


# ---------------------------------------------------------------------
# Swapping
# ---------------------------------------------------------------------
def test_swap_corrections_are_reproducible():
    assert derive_swap_corrections() == SWAP_CORRECTIONS


@pytest.mark.parametrize("eta", [1.0, 0.8])
def test_swap_probability(eta):
    left = ideal_pair("A", "R", ("A.l", "A.r"), (FREQ_A, FREQ_B))
    right = ideal_pair("R", "B", ("B.l", "B.r"), (FREQ_B, FREQ_A))
    paths = swap_paths(left, right, NoiseParams(eta=eta))
    assert success_probability(paths) == pytest.approx(eta**2 / 2, abs=1e-12)
    for p in paths:
        if p.success:
            assert p.pair.fidelity == pytest.approx(1.0, abs=1e-12)
            assert (p.pair.station_left, p.pair.station_right) == ("A", "B")


def test_swapping_singlets_gives_unit_fidelity():
    left = pair("A", "R", ("A.l", "A.r"), (FREQ_A, FREQ_B), BellKind.PSI_MINUS)
    right = pair("R", "B", ("B.l", "B.r"), (FREQ_B, FREQ_A), BellKind.PSI_MINUS)
    paths = swap_paths(left, right, NoiseParams(eta=1.0))
    assert success_probability(paths) == pytest.approx(0.5)
    for p in paths:
        if p.success:
            tgt = target_state(p.pair.state.registry, "A.l", "B.r")
            assert fidelity(p.pair.state, tgt) == pytest.approx(1.0, abs=1e-12)


def test_swap_requires_adjacent_links():
    a = ideal_pair("A", "R", ("A.l", "A.r"))
    b = ideal_pair("S", "B", ("B.l", "B.r"), (FREQ_B, FREQ_A))
    with pytest.raises(TopologyError):
        swap_paths(a, b, IDEAL)


def test_swap_missing_input():
    assert swap(None, ideal_pair("R", "B", ("B.l", "B.r")), IDEAL, np.random.default_rng(0)) is None


# ---------------------------------------------------------------------
# Monte Carlo harness
# ---------------------------------------------------------------------
def test_trial_streams_are_independent_of_order():
    a = trial_rng(5, 17).random(3)
    _ = trial_rng(5, 3).random(3)
    assert np.array_equal(a, trial_rng(5, 17).random(3))
    assert not np.array_equal(a, trial_rng(5, 18).random(3))


def test_chain_config_validation():
    with pytest.raises(ConfigurationError):
        ChainConfig(n_links=0)
    with pytest.raises(ConfigurationError):
        ChainConfig(trials=0)
    with pytest.raises(ConfigurationError):
        ChainConfig(placement="nowhere")


@pytest.mark.parametrize("n_links", [1, 2])
def test_report_identical_across_worker_counts(n_links):
    cfg = ChainConfig(n_links=n_links, params=NoiseParams(), trials=3000, seed=11)
    ref = json.dumps(run_chain(cfg, workers=1).to_dict(), sort_keys=True)
    for workers in (2, 5):
        assert json.dumps(run_chain(cfg, workers=workers).to_dict(), sort_keys=True) == ref


def test_ideal_purify_rate_monte_carlo():
    out = estimate_purify_rate(IDEAL, 10_000, seed=3)
    assert out["exact"] == pytest.approx(1 / 128)
    assert out["within_3_sigma"]


def test_ideal_swap_rate_monte_carlo():
    assert estimate_swap_rate(IDEAL, 10_000, seed=4)["within_3_sigma"]


def test_events_respect_conditioning_causality():
    params = NoiseParams(p_s=1.0, gamma=0.0, zeta=1.0)
    cfg = ChainConfig(n_links=2, params=params, trials=400, seed=2, table1_convention=True)
    events = []
    report = run_chain(cfg, event_sink=events)
    assert report.causality_ok
    assert report.successes > 0
    by_trial = {}
    for trial, e in events:
        by_trial.setdefault(trial, []).append(e)
    for evs in by_trial.values():
        for i, e in enumerate(evs):
            if e.component == "purifier" and e.outcome == "accepted":
                before = [(x.component, x.outcome) for x in evs[:i]]
                assert sum(c == "cnot" and o.startswith("ok") for c, o in before) >= 2
                assert sum(c == "target" for c, _ in before) >= 2
            if e.component == "swapper" and e.outcome != "fail":
                assert sum(x.outcome == "accepted" for x in evs[:i]) == 2


def test_two_link_chain_component_order():
    cfg = ChainConfig(n_links=2, params=NoiseParams(), trials=200, seed=1, table1_convention=True)
    report = run_chain(cfg)
    assert order_of_magnitude(report.expected_components["n_total"]) == 3
    assert report.tally_per_trial == {"guns": 12, "detectors": 22}


def test_event_log_format():
    events = []
    run_chain(ChainConfig(trials=2, seed=0), event_sink=events)
    text = format_event_log(events)
    lines = text.splitlines()
    assert lines[0] == "trial,station,component,outcome,probability"
    assert all(len(line.split(",")) == 5 for line in lines)
