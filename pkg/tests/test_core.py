import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scoopsim.core import (DensityMatrixError, Well, WellSystem, ZurekInputs, analytic_rabi_py,
                           build_hamiltonian, check_density_matrix, epsilon_for_occupancy,
                           mean_y_occupancy, population, pure_state, zurek_decoherence_time)

# CODATA 2018 exact / recommended values, typed in by hand
HBAR = 1.054571817e-34
K_B = 1.380649e-23
M_P = 1.67262192369e-27

finite = st.floats(-50, 50, allow_nan=False)
positive = st.floats(0.01, 50)


def test_hamiltonian_layout():
    H = build_hamiltonian(WellSystem(2.0, 3.0))
    np.testing.assert_array_equal(H, [[0, -1], [-1, 3]])
    H3 = build_hamiltonian(WellSystem(2.0, 3.0, include_capture_state=True))
    assert H3.shape == (3, 3)
    assert not H3[2].any() and not H3[:, 2].any()


@given(positive, finite)
def test_rabi_frequency_and_amplitude(delta, eps):
    s = WellSystem(delta, eps)
    ev = np.linalg.eigvalsh(build_hamiltonian(s))
    assert math.isclose(ev[1] - ev[0], s.rabi_frequency, rel_tol=1e-9)
    assert math.isclose(s.rabi_amplitude, delta**2 / (delta**2 + eps**2), rel_tol=1e-12)


def test_system_validation():
    with pytest.raises(ValueError):
        WellSystem(-1.0)
    with pytest.raises(ValueError):
        WellSystem(1.0, math.inf)
    assert WellSystem(1.0).with_capture_state().dim == 3


def test_pure_state_and_population():
    rho = pure_state("y", 3)
    assert population(rho, Well.Y) == 1.0 and population(rho, "C") == 0.0
    with pytest.raises(ValueError):
        pure_state(Well.C, 2)
    with pytest.raises(ValueError):
        pure_state("Z")
    bad = pure_state(Well.X).copy()
    bad[0, 0] += 1e-8j
    with pytest.raises(DensityMatrixError):
        population(bad, Well.X)


def test_population_clamps_roundoff():
    rho = np.diag([1 + 1e-15, -1e-15]).astype(complex)
    assert population(rho, Well.X) == 1.0 and population(rho, Well.Y) == 0.0


def test_density_matrix_checks():
    check_density_matrix(0.5 * np.eye(2))
    with pytest.raises(DensityMatrixError, match="Hermitian"):
        check_density_matrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(DensityMatrixError, match="eigenvalue"):
        check_density_matrix(np.array([[0.5, 0.6], [0.6, 0.5]]))
    with pytest.raises(DensityMatrixError, match="trace"):
        check_density_matrix(0.4 * np.eye(2))
    check_density_matrix(0.4 * np.eye(2), unit_trace=False)
    with pytest.raises(DensityMatrixError):
        check_density_matrix(np.eye(4) / 4)


@given(positive, finite)
def test_mean_occupancy_is_time_average(delta, eps):
    omega = math.hypot(delta, eps)
    t = np.linspace(0, 2 * math.pi / omega, 4001)[:-1]
    assert math.isclose(analytic_rabi_py(delta, eps, t).mean(), mean_y_occupancy(delta, eps),
                        rel_tol=1e-9, abs_tol=1e-15)


def test_rabi_resonant_full_transfer():
    assert math.isclose(analytic_rabi_py(1.0, 0.0, math.pi), 1.0)
    assert analytic_rabi_py(0.0, 0.0, 3.0) == 0.0
    with pytest.raises(ValueError):
        analytic_rabi_py(-1.0, 0.0, 1.0)


@settings(max_examples=50)
@given(st.floats(0.1, 10), st.floats(1e-9, 0.49))
def test_epsilon_for_occupancy_inverts_mean(delta, p):
    eps = epsilon_for_occupancy(delta, p)
    assert math.isclose(mean_y_occupancy(delta, eps), p, rel_tol=1e-9)


def test_ten_per_million_bias():
    eps = epsilon_for_occupancy(1.0, 1e-5)
    assert math.isclose(eps, math.sqrt(49999), rel_tol=1e-14)
    assert math.isclose(eps, 223.6, rel_tol=1e-4)
    with pytest.raises(ValueError):
        epsilon_for_occupancy(1.0, 0.5)
    with pytest.raises(ValueError):
        epsilon_for_occupancy(0.0, 1e-5)


PROTON = ZurekInputs(M_P, 310.0, 1e-10, 1.0)


def test_zurek_proton_against_hand_value():
    hand = 1.0 * HBAR**2 / (2 * M_P * K_B * 310.0 * (1e-10) ** 2)
    got = zurek_decoherence_time(PROTON)
    assert abs(got - hand) / hand < 1e-3
    assert abs(got - 7.8e-2) / 7.8e-2 < 0.01


@pytest.mark.parametrize("field,factor,power", [
    ("relaxation_time", 3.0, 1), ("mass", 3.0, -1), ("temperature", 3.0, -1),
    ("displacement", 3.0, -2)])
def test_zurek_scaling_laws(field, factor, power):
    base = zurek_decoherence_time(PROTON)
    scaled = zurek_decoherence_time(
        ZurekInputs(**{**PROTON.__dict__, field: getattr(PROTON, field) * factor}))
    assert abs(scaled / base - factor**power) <= 1e-12 * factor**abs(power)


@pytest.mark.parametrize("field", ["mass", "temperature", "displacement", "relaxation_time"])
def test_zurek_inputs_must_be_positive(field):
    with pytest.raises(ValueError, match=field):
        ZurekInputs(**{**PROTON.__dict__, field: 0.0})
