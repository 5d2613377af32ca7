"""Dense, noiseless statevector simulator with the gates QAOA needs.

Conventions used everywhere in this package:

- qubit 0 is the least significant bit of a basis index;
- bit 0 maps to spin -1 and bit 1 to spin +1 (s = 2x - 1);
- every gate is exp(-i * angle * P) for a Pauli string P, so callers fold
  any coefficient (gamma * h, gamma * J, beta) into ``angle`` themselves.

Gates update ``state.amplitudes`` in place and return the same state.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict

import numpy as np

logger = logging.getLogger(__name__)

# 2^24 complex128 amplitudes is 256 MiB; anything larger is not desk-scale.
MAX_QUBITS = 24

# Pair index tables are memoised only up to this size (4 MiB per entry at 20 qubits).
PAIR_CACHE_MAX_QUBITS = 20


class CapacityError(ValueError):
    """Raised when a register is outside the supported size."""


@dataclass(eq=False)
class StateVector:
    """Amplitudes over ``n_qubits`` qubits (length 2**n_qubits)."""
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_capacity(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"amplitudes must have length {1 << self.n_qubits} for "
                f"{self.n_qubits} qubits, got shape {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits}, dim={self.dim})"


def _check_capacity(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be between 1 and {MAX_QUBITS}, got {n_qubits!r}")


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits} qubits")


def _check_pair(state: StateVector, qubit_a: int, qubit_b: int) -> None:
    _check_qubit(state, qubit_a)
    _check_qubit(state, qubit_b)
    if qubit_a == qubit_b:
        raise IndexError(f"two-qubit gate needs distinct qubits, got {qubit_a} twice")


def _split(state: StateVector, qubit: int) -> np.ndarray:
    """View the amplitudes as (high, bit, low) so ``[:, b, :]`` selects bit b."""
    return state.amplitudes.reshape(-1, 2, 1 << qubit)


def _build_pair_indices(n_qubits: int, qubit_a: int, qubit_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices with (bit_a, bit_b) = (0, 1) and their (1, 0) partners."""
    index = np.arange(1 << n_qubits, dtype=np.int64)
    bit_a = (index >> qubit_a) & 1
    bit_b = (index >> qubit_b) & 1
    low = index[(bit_a == 0) & (bit_b == 1)]
    high = low ^ ((1 << qubit_a) | (1 << qubit_b))
    low.setflags(write=False)
    high.setflags(write=False)
    return low, high


_cached_pair_indices = lru_cache(maxsize=2 * MAX_QUBITS)(_build_pair_indices)


def _pair_indices(n_qubits: int, qubit_a: int, qubit_b: int) -> tuple[np.ndarray, np.ndarray]:
    if n_qubits > PAIR_CACHE_MAX_QUBITS:
        return _build_pair_indices(n_qubits, qubit_a, qubit_b)
    return _cached_pair_indices(n_qubits, qubit_a, qubit_b)


def init_uniform(n_qubits: int) -> StateVector:
    """Equal superposition |+>^n."""
    _check_capacity(n_qubits)
    dim = 1 << n_qubits
    return StateVector(n_qubits, np.full(dim, dim ** -0.5, dtype=np.complex128))


def basis_state(n_qubits: int, index: int) -> StateVector:
    """Computational basis state |index>."""
    _check_capacity(n_qubits)
    if not 0 <= index < (1 << n_qubits):
        raise IndexError(f"basis index {index} out of range for {n_qubits} qubits")
    amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(n_qubits, amplitudes)


def apply_exp_z(state: StateVector, qubit: int, angle: float) -> StateVector:
    """exp(-i * angle * Z_qubit)."""
    _check_qubit(state, qubit)
    view = _split(state, qubit)
    view[:, 0, :] *= np.exp(1j * angle)   # spin -1
    view[:, 1, :] *= np.exp(-1j * angle)  # spin +1
    return state


def apply_exp_zz(state: StateVector, qubit_a: int, qubit_b: int, angle: float) -> StateVector:
    """exp(-i * angle * Z_a Z_b)."""
    _check_pair(state, qubit_a, qubit_b)
    index = np.arange(state.dim, dtype=np.int64)
    differ = ((index >> qubit_a) ^ (index >> qubit_b)) & 1
    state.amplitudes *= np.where(differ == 1, np.exp(1j * angle), np.exp(-1j * angle))
    return state


def apply_diagonal_phase(state: StateVector, energies: np.ndarray, angle: float) -> StateVector:
    """exp(-i * angle * H) for a diagonal H given by its basis-state energies."""
    if energies.shape != state.amplitudes.shape:
        raise ValueError(
            f"diagonal has shape {energies.shape}, state has {state.amplitudes.shape}"
        )
    state.amplitudes *= np.exp(-1j * angle * energies)
    return state


def apply_exp_x(state: StateVector, qubit: int, angle: float) -> StateVector:
    """exp(-i * angle * X_qubit) = cos(angle) I - i sin(angle) X."""
    _check_qubit(state, qubit)
    view = _split(state, qubit)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :].copy()
    c, s = np.cos(angle), np.sin(angle)
    view[:, 0, :] = c * a0 - 1j * s * a1
    view[:, 1, :] = c * a1 - 1j * s * a0
    return state


def apply_exp_xxyy(state: StateVector, qubit_a: int, qubit_b: int, angle: float) -> StateVector:
    """exp(-i * angle * (X_a X_b + Y_a Y_b)).

    XX + YY is 2X on the one-excitation pair subspace {|01>, |10>} and zero on
    |00>, |11>, so only that subspace rotates, by twice the angle.
    """
    _check_pair(state, qubit_a, qubit_b)
    low, high = _pair_indices(state.n_qubits, qubit_a, qubit_b)
    amps = state.amplitudes
    a01 = amps[low]
    a10 = amps[high]
    c, s = np.cos(2 * angle), np.sin(2 * angle)
    amps[low] = c * a01 - 1j * s * a10
    amps[high] = c * a10 - 1j * s * a01
    return state


def probabilities(state: StateVector) -> np.ndarray:
    """|amplitude|^2 per basis index."""
    amps = state.amplitudes
    return amps.real ** 2 + amps.imag ** 2


def expectation_diagonal(state: StateVector, energies: np.ndarray) -> float:
    """<psi|H|psi> for diagonal H, by direct contraction."""
    return float(np.vdot(state.amplitudes, energies * state.amplitudes).real)


def sample(state: StateVector, shots: int, seed: int) -> Dict[int, int]:
    """Draw ``shots`` measurements; returns {basis index: count} for observed outcomes."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = probabilities(state)
    probs = probs / probs.sum()
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    observed = np.flatnonzero(counts)
    return {int(i): int(counts[i]) for i in observed}
