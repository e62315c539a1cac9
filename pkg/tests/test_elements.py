import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrepeater.elements import (
    BS_MATRIX,
    CIRCULAR,
    LINEAR,
    ChannelParams,
    apply_beam_splitter,
    apply_local_unitary,
    apply_pbs,
    channel_transit,
    channel_transit_branches,
    detect,
    detection_branches,
    dichroic_split,
    gate,
    pbs_matrix,
)
from qrepeater.errors import ContractViolation, DomainError, FrequencyMismatch, RoutingError
from qrepeater.fock import FockState, ModeRegistry, apply_creation, apply_polynomial, make_vacuum
from qrepeater.sources import BellKind, bell_state


def one_photon(reg, mode, pol):
    return apply_creation(make_vacuum(reg), mode, pol)


@pytest.fixture
def reg():
    return ModeRegistry([("a", "w1"), ("b", "w1")])


# ---------------------------------------------------------------------
# Splitters
# ---------------------------------------------------------------------
@pytest.mark.parametrize("basis", [LINEAR, CIRCULAR])
def test_pbs_is_hermitian_involution(basis):
    m = pbs_matrix(basis)
    assert np.allclose(m, m.conj().T)
    assert np.allclose(m @ m, np.eye(4))


def test_linear_pbs_transmits_h_reflects_v(reg):
    out = apply_pbs(one_photon(reg, "a", "H"), "a", "b", LINEAR)
    assert out.terms == {(1, 0, 0, 0): 1}
    out = apply_pbs(one_photon(reg, "a", "V"), "a", "b", LINEAR)
    assert list(out.terms) == [(0, 0, 0, 1)]
    assert out.terms[(0, 0, 0, 1)] == pytest.approx(1j)


def test_circular_pbs_routes_r_and_l(reg):
    r = 1 / math.sqrt(2)
    right = apply_polynomial(make_vacuum(reg), [(r, [("a", "H")]), (1j * r, [("a", "V")])])
    left = apply_polynomial(make_vacuum(reg), [(r, [("a", "H")]), (-1j * r, [("a", "V")])])
    assert apply_pbs(right, "a", "b", CIRCULAR).mode_counts("b") == {0}
    assert apply_pbs(left, "a", "b", CIRCULAR).mode_counts("a") == {0}


def test_hong_ou_mandel_bunching(reg):
    s = apply_creation(one_photon(reg, "a", "H"), "b", "H")
    out = apply_beam_splitter(s, "a", "b")
    assert out.amplitude({("a", "H"): 1, ("b", "H"): 1}) == pytest.approx(0)
    assert out.norm() == pytest.approx(1)
    assert {k for k in out.terms} == {(2, 0, 0, 0), (0, 0, 2, 0)}


def test_beam_splitter_matrix_unitary():
    assert np.allclose(BS_MATRIX.conj().T @ BS_MATRIX, np.eye(4))


def test_splitter_needs_distinct_ports(reg):
    with pytest.raises(ContractViolation):
        apply_pbs(make_vacuum(reg), "a", "a", LINEAR)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    basis=st.sampled_from([LINEAR, CIRCULAR]),
)
def test_pbs_twice_is_identity_on_states(seed, basis):
    rng = np.random.default_rng(seed)
    reg = ModeRegistry([("a", "w1"), ("b", "w1")])
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    amps /= np.linalg.norm(amps)
    terms = dict(zip([(1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1)], amps))
    s = FockState(reg, terms)
    back = apply_pbs(apply_pbs(s, "a", "b", basis), "a", "b", basis)
    assert abs(back.inner(s)) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------
# Frequency rule
# ---------------------------------------------------------------------
def test_frequency_mismatch_with_photons():
    reg = ModeRegistry([("a", "w1"), ("b", "w2")])
    with pytest.raises(FrequencyMismatch):
        apply_pbs(one_photon(reg, "a", "H"), "a", "b", LINEAR)
    with pytest.raises(FrequencyMismatch):
        apply_beam_splitter(one_photon(reg, "b", "V"), "a", "b")


def test_frequency_mismatch_tolerated_on_vacuum():
    reg = ModeRegistry([("a", "w1"), ("b", "w2")])
    assert apply_pbs(make_vacuum(reg), "a", "b", LINEAR).terms == make_vacuum(reg).terms


# ---------------------------------------------------------------------
# Wave plates
# ---------------------------------------------------------------------
def test_gate_products_apply_rightmost_first():
    assert np.allclose(gate("X.Z"), gate("X") @ gate("Z"))
    assert np.allclose(gate("S") @ gate("Sdg"), np.eye(2))


def test_local_unitary_rejects_non_unitary(reg):
    with pytest.raises(ContractViolation):
        apply_local_unitary(make_vacuum(reg), "a", np.diag([1.0, 2.0]))


def test_local_unitary_flips_polarization(reg):
    out = apply_local_unitary(one_photon(reg, "a", "H"), "a", "X")
    assert out.terms == {(0, 1, 0, 0): 1}


# ---------------------------------------------------------------------
# Dichroic routing
# ---------------------------------------------------------------------
def test_dichroic_split_routes_by_frequency():
    reg = ModeRegistry([("in@w1", "w1"), ("in@w2", "w2"), ("lo", "w1"), ("hi", "w2")])
    s = apply_creation(apply_creation(make_vacuum(reg), "in@w1", "H"), "in@w2", "V")
    out = dichroic_split(s, "in", "lo", "hi")
    assert out.mode_counts("lo", "H") == {1}
    assert out.mode_counts("hi", "V") == {1}
    assert out.mode_counts("in@w1") == {0}


def test_dichroic_split_preserves_entanglement():
    reg = ModeRegistry([("in@w1", "w1"), ("in@w2", "w2"), ("lo", "w1"), ("hi", "w2")])
    s = bell_state(reg, "in@w1", "in@w2", BellKind.PSI_MINUS)
    out = dichroic_split(s, "in", "lo", "hi")
    want = bell_state(reg, "lo", "hi", BellKind.PSI_MINUS)
    assert abs(want.inner(out)) == pytest.approx(1.0)


def test_dichroic_split_unknown_frequency():
    reg = ModeRegistry([("in@w3", "w3"), ("lo", "w1"), ("hi", "w2")])
    with pytest.raises(RoutingError):
        dichroic_split(one_photon(reg, "in@w3", "H"), "in", "lo", "hi")


def test_dichroic_split_needs_distinct_outputs():
    reg = ModeRegistry([("in@w1", "w1"), ("lo", "w1"), ("hi", "w1")])
    with pytest.raises(RoutingError):
        dichroic_split(make_vacuum(reg), "in", "lo", "hi")


# ---------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------
@pytest.mark.parametrize("eta", [1.0, 0.8, 0.3])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_bucket_click_probability(eta, n):
    reg = ModeRegistry(["d"])
    s = make_vacuum(reg)
    for _ in range(n):
        s = apply_creation(s, "d", "H")
    s = s.normalized()
    branches = detection_branches(s, "d", LINEAR, eta)
    assert math.fsum(b.probability for b in branches) == pytest.approx(1.0)
    clicked = math.fsum(b.probability for b in branches if b.record.clicked)
    assert clicked == pytest.approx(1 - (1 - eta) ** n)


def test_detector_resolves_polarization_in_basis():
    reg = ModeRegistry(["d"])
    r = 1 / math.sqrt(2)
    plus_r = apply_polynomial(make_vacuum(reg), [(r, [("d", "H")]), (1j * r, [("d", "V")])])
    (b,) = detection_branches(plus_r, "d", CIRCULAR, 1.0)
    assert b.record.resolved_pol == "R"
    assert b.record.single
    assert b.state.total_photons() == {0}


def test_detector_absorbs_and_conditions():
    reg = ModeRegistry(["a", "b"])
    s = bell_state(reg, "a", "b", BellKind.PHI_PLUS)
    for b in detection_branches(s, "a", LINEAR, 1.0):
        assert b.record.resolved_pol in ("H", "V")
        assert b.state.mode_counts("a") == {0}
        assert b.state.mode_counts("b", b.record.resolved_pol) == {1}


def test_detector_efficiency_domain():
    with pytest.raises(DomainError):
        detection_branches(make_vacuum(ModeRegistry(["a"])), "a", LINEAR, 1.2)


def test_detect_sampling_is_seeded():
    reg = ModeRegistry(["a", "b"])
    s = bell_state(reg, "a", "b")
    r1 = detect(s, "a", LINEAR, 1.0, np.random.default_rng(3))[0]
    r2 = detect(s, "a", LINEAR, 1.0, np.random.default_rng(3))[0]
    assert r1 == r2


# ---------------------------------------------------------------------
# Pair transit
# ---------------------------------------------------------------------
def test_channel_branches_weights():
    reg = ModeRegistry([("a", "w1"), ("b", "w2")])
    s = bell_state(reg, "a", "b")
    br = channel_transit_branches(s, ChannelParams(gamma=0.5, zeta=math.sqrt(0.5)))
    assert math.fsum(b.probability for b in br) == pytest.approx(1.0)
    clean = [b for b in br if b.survived and not b.dephased][0]
    flipped = [b for b in br if b.dephased][0]
    assert clean.probability == pytest.approx(math.sqrt(0.5) * 0.5)
    phi_minus = bell_state(reg, "a", "b", BellKind.PHI_MINUS)
    assert abs(phi_minus.inner(flipped.state)) == pytest.approx(1.0)


def test_channel_needs_a_pair():
    reg = ModeRegistry(["a", "b"])
    with pytest.raises(ContractViolation):
        channel_transit_branches(one_photon(reg, "a", "H"), ChannelParams())


def test_channel_params_domain():
    with pytest.raises(DomainError):
        ChannelParams(gamma=-0.1)


def test_channel_transit_sample_lost_is_vacuum():
    reg = ModeRegistry(["a", "b"])
    survived, _, mixed = channel_transit(bell_state(reg, "a", "b"), ChannelParams(zeta=0.0), np.random.default_rng(0))
    assert not survived
    assert mixed.branches[0][1].total_photons() == {0}
