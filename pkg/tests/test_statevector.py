"""Tests for the statevector simulator."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

import statevector
from statevector import (
    MAX_QUBITS,
    CapacityError,
    StateVector,
    apply_diagonal_phase,
    apply_exp_x,
    apply_exp_xxyy,
    apply_exp_z,
    apply_exp_zz,
    basis_state,
    expectation_diagonal,
    init_uniform,
    probabilities,
    sample,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def dense(n_qubits, ops):
    """Full operator with ``ops[q]`` on qubit q (qubit 0 is the rightmost kron factor)."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n_qubits)):
        out = np.kron(out, ops.get(q, I2))
    return out


def random_state(n_qubits, seed=0):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector(n_qubits, amps / np.linalg.norm(amps))


# Bit 0 is spin -1, so the physical Z eigenvalue of |0> is -1 here.
SPIN_Z = -Z


class TestConstruction:
    """Register construction and capacity checks."""

    def test_uniform_is_normalised(self):
        state = init_uniform(5)
        assert state.dim == 32
        assert state.norm() == pytest.approx(1.0)
        assert np.allclose(probabilities(state), 1 / 32)

    def test_basis_state(self):
        state = basis_state(3, 5)
        assert probabilities(state)[5] == 1.0
        assert probabilities(state).sum() == 1.0

    def test_basis_index_out_of_range(self):
        with pytest.raises(IndexError):
            basis_state(2, 4)

    @pytest.mark.parametrize("n", [0, MAX_QUBITS + 1])
    def test_capacity(self, n):
        with pytest.raises(CapacityError):
            init_uniform(n)

    def test_capacity_error_is_value_error(self):
        assert issubclass(CapacityError, ValueError)

    def test_amplitude_length_checked(self):
        with pytest.raises(ValueError):
            StateVector(2, np.ones(3))


class TestGatesAgainstDenseMatrices:
    """Each gate equals exp(-i angle P) for its Pauli string, spin convention included."""

    def test_exp_z(self):
        state = random_state(3, seed=1)
        expected = expm(-1j * 0.37 * dense(3, {1: SPIN_Z})) @ state.amplitudes
        apply_exp_z(state, 1, 0.37)
        assert np.allclose(state.amplitudes, expected, atol=1e-12)

    def test_exp_zz(self):
        state = random_state(3, seed=2)
        expected = expm(-1j * 0.81 * dense(3, {0: SPIN_Z, 2: SPIN_Z})) @ state.amplitudes
        apply_exp_zz(state, 0, 2, 0.81)
        assert np.allclose(state.amplitudes, expected, atol=1e-12)

    def test_exp_x(self):
        state = random_state(3, seed=3)
        expected = expm(-1j * 1.3 * dense(3, {2: X})) @ state.amplitudes
        apply_exp_x(state, 2, 1.3)
        assert np.allclose(state.amplitudes, expected, atol=1e-12)

    def test_exp_xxyy(self):
        state = random_state(4, seed=4)
        generator = dense(4, {0: X, 3: X}) + dense(4, {0: Y, 3: Y})
        expected = expm(-1j * 0.55 * generator) @ state.amplitudes
        apply_exp_xxyy(state, 3, 0, 0.55)
        assert np.allclose(state.amplitudes, expected, atol=1e-12)

    def test_diagonal_phase(self):
        state = random_state(2, seed=5)
        energies = np.array([0.5, -1.0, 2.0, 0.25])
        expected = np.exp(-1j * 0.9 * energies) * state.amplitudes
        apply_diagonal_phase(state, energies, 0.9)
        assert np.allclose(state.amplitudes, expected)

    def test_diagonal_shape_checked(self):
        with pytest.raises(ValueError):
            apply_diagonal_phase(init_uniform(2), np.zeros(3), 0.1)


def test_exp_z_spin_convention():
    """|0> is spin -1, so exp(-i a Z) multiplies it by exp(+i a)."""
    state = basis_state(1, 0)
    apply_exp_z(state, 0, 0.4)
    assert state.amplitudes[0] == pytest.approx(np.exp(0.4j))


def test_exp_x_quarter_turn_flips():
    state = basis_state(1, 0)
    apply_exp_x(state, 0, math.pi / 2)
    assert np.allclose(state.amplitudes, [0, -1j])


def test_xxyy_leaves_aligned_pairs_alone():
    for index in (0b00, 0b11):
        state = basis_state(2, index)
        apply_exp_xxyy(state, 0, 1, 0.7)
        assert probabilities(state)[index] == pytest.approx(1.0)


def test_xxyy_conserves_hamming_weight():
    state = basis_state(4, 0b0011)
    for a, b, angle in [(1, 2, 0.3), (0, 3, 1.1), (2, 3, 0.6)]:
        apply_exp_xxyy(state, a, b, angle)
    weights = np.array([bin(i).count("1") for i in range(16)])
    assert probabilities(state)[weights != 2].sum() < 1e-15


@pytest.mark.parametrize("gate, args", [
    (apply_exp_z, (3, 0.1)),
    (apply_exp_x, (-1, 0.1)),
    (apply_exp_zz, (0, 0, 0.1)),
    (apply_exp_xxyy, (1, 5, 0.1)),
])
def test_qubit_index_errors(gate, args):
    with pytest.raises(IndexError):
        gate(init_uniform(3), *args)


def test_gate_sequence_preserves_norm():
    state = random_state(5, seed=9)
    rng = np.random.default_rng(0)
    for _ in range(40):
        a, b = rng.choice(5, size=2, replace=False)
        angle = rng.uniform(0, 2 * math.pi)
        apply_exp_x(state, int(a), angle)
        apply_exp_zz(state, int(a), int(b), angle)
        apply_exp_xxyy(state, int(a), int(b), angle)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)


def test_expectation_diagonal_matches_probabilities():
    state = random_state(3, seed=11)
    energies = np.arange(8, dtype=float) - 3.5
    assert expectation_diagonal(state, energies) == pytest.approx(probabilities(state) @ energies)


class TestSample:
    """Seeded measurement sampling."""

    def test_million_shots_within_binomial_bound(self):
        state = random_state(4, seed=9)
        probs = probabilities(state)
        shots = 1_000_000
        counts = sample(state, shots, seed=17)
        for index, p in enumerate(probs):
            sd = math.sqrt(shots * p * (1 - p))
            assert abs(counts.get(index, 0) - shots * p) <= 5 * sd + 1

    def test_counts_sum_to_shots(self):
        counts = sample(init_uniform(3), 1000, seed=1)
        assert sum(counts.values()) == 1000
        assert set(counts) <= set(range(8))

    def test_seeded(self):
        state = random_state(4, seed=2)
        assert sample(state, 500, seed=3) == sample(state, 500, seed=3)

    def test_basis_state_always_observed(self):
        assert sample(basis_state(3, 6), 50, seed=0) == {6: 50}

    def test_rejects_zero_shots(self):
        with pytest.raises(ValueError):
            sample(init_uniform(1), 0, seed=0)


def test_exp_x_angles_compose():
    rng = np.random.default_rng(4)
    for theta_1, theta_2 in rng.uniform(-math.pi, math.pi, size=(10, 2)):
        stepwise = random_state(3, seed=5)
        apply_exp_x(stepwise, 1, theta_1)
        apply_exp_x(stepwise, 1, theta_2)
        combined = random_state(3, seed=5)
        apply_exp_x(combined, 1, theta_1 + theta_2)
        assert np.allclose(stepwise.amplitudes, combined.amplitudes, atol=1e-12)


def test_pair_index_tables_cached_only_for_small_registers(monkeypatch):
    statevector._cached_pair_indices.cache_clear()
    apply_exp_xxyy(random_state(4), 0, 3, 0.3)
    apply_exp_xxyy(random_state(4), 0, 3, 0.5)
    assert statevector._cached_pair_indices.cache_info().hits == 1

    monkeypatch.setattr(statevector, "PAIR_CACHE_MAX_QUBITS", 3)
    statevector._cached_pair_indices.cache_clear()
    state = random_state(4)
    expected = expm(-1j * 0.3 * (dense(4, {0: X, 3: X}) + dense(4, {0: Y, 3: Y}))) @ state.amplitudes
    apply_exp_xxyy(state, 0, 3, 0.3)
    assert np.allclose(state.amplitudes, expected)
    assert statevector._cached_pair_indices.cache_info().currsize == 0
