from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hczsim.circuit import (
    IDEAL_THETA,
    CircuitParams,
    CouplerSpec,
    InternalPhases,
    build_circuit,
    build_compositional,
    coupler_reflectivity,
    hcz_target,
    ideal_params,
    pi_phase_gamma,
    swap_ancilla_rows,
)
from hczsim.errors import ContractViolation
from hczsim.fock import unitarity_error
from hczsim.metrics import mode_fidelity
from oracles import printed_circuit_matrix

angles = st.floats(0.05, 1.5)
phases = st.floats(-math.pi, math.pi)


def test_design_reflectivities():
    assert np.allclose(ideal_params().reflectivities(), [1 / 3, 1 / 3, 1 / 3, 0.5 + 1 / math.sqrt(6)])


@settings(max_examples=50, deadline=None)
@given(t=st.tuples(angles, angles, angles, angles), phi=phases)
def test_closed_form_is_unitary_and_matches_reference(t, phi):
    u = build_circuit(CircuitParams(t, phi))
    assert unitarity_error(u) < 1e-12
    assert np.allclose(u, printed_circuit_matrix(np.array(t), phi), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(t=st.tuples(angles, angles, angles, angles), pc=phases, pa=phases, pb=phases, pt=phases)
def test_compositional_form_is_gauge_equivalent(t, pc, pa, pb, pt):
    ph = InternalPhases(pc, pa, pb, pt)
    closed = build_circuit(CircuitParams(t, ph.net()))
    comp = build_compositional(CircuitParams(t, 0.0), ph)
    assert mode_fidelity(comp, closed) == pytest.approx(1, abs=1e-9)


def test_net_phase_example():
    # only phi_c - phi_a + phi_b - phi_t survives external re-phasing
    assert InternalPhases(0.2, 0.1, 0.05, 0.05).net() == pytest.approx(0.1)


def test_phase_outside_net_combination_has_no_effect():
    p = CircuitParams(IDEAL_THETA, 0.0)
    a = build_compositional(p, InternalPhases(0.3, 0.3, 0.0, 0.0))
    assert mode_fidelity(a, build_circuit(p)) == pytest.approx(1, abs=1e-10)


def test_deviation_round_trip():
    p = CircuitParams.from_deviations((0.1, -0.2, 0.03, 0.0), 0.4)
    assert np.allclose(p.deviations(), [0.1, -0.2, 0.03, 0.0, 0.4])
    assert CircuitParams.from_vector(p.deviations()) == p


def test_param_validation():
    with pytest.raises(ContractViolation):
        CircuitParams((0.1, 0.2, 0.3), 0.0)


def test_target_differs_from_design_by_row_signs():
    assert np.allclose(hcz_target(), np.diag([-1, 1, -1, 1]) @ build_circuit(ideal_params()))


def test_swap_ancilla_rows():
    u = build_circuit(ideal_params())
    s = swap_ancilla_rows(u)
    assert np.array_equal(s[2], u[3]) and np.array_equal(s[3], u[2])
    with pytest.raises(ContractViolation):
        swap_ancilla_rows(np.eye(3))


@pytest.mark.parametrize("gamma", [0.0, 0.3, math.pi / 4, 1.2])
def test_coupler_matches_beamsplitter(gamma):
    r = coupler_reflectivity(CouplerSpec(coupling=gamma / 2, length=2.0))
    assert r.reflectivity == pytest.approx(math.cos(gamma) ** 2)
    assert r.reflectivity + r.cross_fraction == pytest.approx(1)


def test_detuned_coupler_limits_transfer():
    r = coupler_reflectivity(CouplerSpec(coupling=1.0, length=math.pi / 2, detuning=2.0))
    # Omega = sqrt(2): full transfer impossible, bounded by (C/Omega)^2 = 1/2
    assert r.cross_fraction <= 0.5 + 1e-12
    assert unitarity_error(r.transfer) < 1e-12


def test_detuned_coupler_tends_to_synchronous():
    a = coupler_reflectivity(CouplerSpec(1.0, 0.7, detuning=1e-9))
    b = coupler_reflectivity(CouplerSpec(1.0, 0.7))
    assert a.reflectivity == pytest.approx(b.reflectivity, abs=1e-12)


@pytest.mark.parametrize("theta", [0.3, IDEAL_THETA[0], IDEAL_THETA[3]])
def test_pi_phase_gamma_keeps_reflectivity_and_flips_coupling(theta):
    g = pi_phase_gamma(theta)
    r = coupler_reflectivity(CouplerSpec(coupling=g, length=1.0))
    assert r.reflectivity == pytest.approx(math.cos(theta) ** 2)
    assert np.allclose(r.transfer, [[math.cos(theta), -1j * math.sin(theta)], [-1j * math.sin(theta), math.cos(theta)]])


def test_pi_phase_gamma_range():
    with pytest.raises(ContractViolation):
        pi_phase_gamma(2.0)


def test_unitarity_over_many_draws():
    rng = np.random.default_rng(1000)
    for _ in range(1000):
        p = CircuitParams(tuple(rng.uniform(-math.pi, math.pi, 4)), rng.uniform(-math.pi, math.pi))
        assert unitarity_error(build_circuit(p)) <= 1e-12


def test_compositional_many_draws():
    rng = np.random.default_rng(200)
    for _ in range(200):
        t = tuple(rng.uniform(0, math.pi / 2, 4))
        ph = InternalPhases(*rng.uniform(-math.pi, math.pi, 4))
        comp = build_compositional(CircuitParams(t, 0.0), ph)
        assert mode_fidelity(comp, build_circuit(CircuitParams(t, ph.net()))) == pytest.approx(1, abs=1e-9)


def test_compositional_zero_is_identity():
    assert np.allclose(build_compositional(CircuitParams((0, 0, 0, 0), 0.0), InternalPhases()), np.eye(4))


def test_design_corner_entry():
    assert build_circuit(ideal_params())[0, 0] == pytest.approx(1 / 3)


def test_swap_is_involution():
    u = build_circuit(ideal_params())
    assert np.array_equal(swap_ancilla_rows(swap_ancilla_rows(u)), u)


def test_full_cross_coupling():
    assert coupler_reflectivity(CouplerSpec(coupling=math.pi / 2, length=1.0)).cross_fraction == pytest.approx(1)


def test_reflectivity_periodic_and_symmetric():
    for g in np.linspace(0, 1.5, 7):
        r = coupler_reflectivity(CouplerSpec(g, 1.0)).reflectivity
        assert coupler_reflectivity(CouplerSpec(g + math.pi, 1.0)).reflectivity == pytest.approx(r)
        assert coupler_reflectivity(CouplerSpec(math.pi - g, 1.0)).reflectivity == pytest.approx(r)


def test_pi_phase_value_and_robustness():
    g = pi_phase_gamma(IDEAL_THETA[0])
    assert g == pytest.approx(5.327868, abs=1e-6)
    # a small length error keeps the coupling term purely imaginary
    t = coupler_reflectivity(CouplerSpec(g + 0.01, 1.0)).transfer
    assert abs(t[0, 1].real) < 1e-15 and t[0, 1].imag < 0


def test_coupler_rejects_negative():
    with pytest.raises(ContractViolation):
        coupler_reflectivity(CouplerSpec(-1.0, 1.0))
