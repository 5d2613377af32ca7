"""Quadratic spin cost functions: C(s) = c + sum h_i s_i + sum_{i<j} J_ij s_i s_j."""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Energy tables are built this many basis states at a time.
CHUNK_BITS = 16


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Canonical Ising model. ``J`` is dense n x n with only i < j populated."""
    n_spins: int
    c: float
    h: np.ndarray
    J: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64)
        J = np.array(self.J, dtype=np.float64)
        if h.shape != (self.n_spins,):
            raise ValueError(f"h must have length {self.n_spins}, got shape {h.shape}")
        if J.shape != (self.n_spins, self.n_spins):
            raise ValueError(f"J must be {self.n_spins}x{self.n_spins}, got shape {J.shape}")
        if np.any(np.tril(J) != 0):
            raise ValueError("J must be strictly upper-triangular")
        if not (np.isfinite(self.c) and np.all(np.isfinite(h)) and np.all(np.isfinite(J))):
            raise ValueError("Ising coefficients must be finite")
        h.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)

    @classmethod
    def zeros(cls, n_spins: int) -> "IsingModel":
        return cls(n_spins, 0.0, np.zeros(n_spins), np.zeros((n_spins, n_spins)))

    def evaluate(self, spins: Sequence[int]) -> float:
        """Cost of one spin assignment (entries must be -1 or +1)."""
        s = np.asarray(spins)
        if s.shape != (self.n_spins,):
            raise ValueError(f"expected {self.n_spins} spins, got shape {s.shape}")
        if not np.all((s == 1) | (s == -1)):
            raise ValueError(f"spins must be +1 or -1, got {s.tolist()}")
        s = s.astype(np.float64)
        return float(self.c + self.h @ s + s @ self.J @ s)

    def energies_range(self, start: int, stop: int) -> np.ndarray:
        """Costs for basis indices [start, stop), bit i of the index being spin i."""
        index = np.arange(start, stop, dtype=np.int64)
        spins = [((index >> i) & 1).astype(np.float64) * 2.0 - 1.0 for i in range(self.n_spins)]
        out = np.full(index.shape, self.c)
        for i in range(self.n_spins):
            if self.h[i]:
                out += self.h[i] * spins[i]
            row = self.J[i]
            for j in np.flatnonzero(row):
                out += row[j] * spins[i] * spins[j]
        return out

    @cached_property
    def energies(self) -> np.ndarray:
        """Cost of every basis state, indexed like a statevector."""
        total = 1 << self.n_spins
        step = 1 << CHUNK_BITS
        table = np.concatenate([
            self.energies_range(start, min(start + step, total))
            for start in range(0, total, step)
        ])
        table.setflags(write=False)
        return table

    def terms(self) -> list[tuple[int, int, float]]:
        """Nonzero couplings as (i, j, value) with i < j."""
        rows, cols = np.nonzero(self.J)
        return [(int(i), int(j), float(self.J[i, j])) for i, j in zip(rows, cols)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_spins": self.n_spins,
            "c": self.c,
            "h": [float(v) for v in self.h],
            "J": [[i, j, v] for i, j, v in self.terms()],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "IsingModel":
        n = int(payload["n_spins"])
        builder = IsingBuilder(n).add_term([], float(payload.get("c", 0.0)))
        for i, value in enumerate(payload.get("h", [])):
            builder.add_term([i], float(value))
        for i, j, value in payload.get("J", []):
            builder.add_term([int(i), int(j)], float(value))
        return builder.build()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "IsingModel":
        return cls.from_dict(json.loads(text))


class IsingBuilder:
    """Accumulates constant, linear and quadratic spin terms into canonical form."""

    def __init__(self, n_spins: int):
        if n_spins < 1:
            raise ValueError(f"n_spins must be positive, got {n_spins}")
        self.n_spins = n_spins
        self.c = 0.0
        self.h = np.zeros(n_spins)
        self.J = np.zeros((n_spins, n_spins))

    def add_term(self, indices: Sequence[int], coefficient: float) -> "IsingBuilder":
        if len(indices) > 2:
            raise ValueError(f"terms of order {len(indices)} are not supported (max 2)")
        for index in indices:
            if not 0 <= index < self.n_spins:
                raise ValueError(f"spin index {index} out of range for {self.n_spins} spins")
        if not indices:
            self.c += coefficient
        elif len(indices) == 1:
            self.h[indices[0]] += coefficient
        else:
            i, j = indices
            if i == j:
                self.c += coefficient  # s_i^2 = 1
            else:
                self.J[min(i, j), max(i, j)] += coefficient
        return self

    def build(self) -> IsingModel:
        return IsingModel(self.n_spins, self.c, self.h.copy(), self.J.copy())


def add_scaled(model_a: IsingModel, model_b: IsingModel, scale: float = 1.0) -> IsingModel:
    """model_a + scale * model_b, coefficient-wise."""
    if model_a.n_spins != model_b.n_spins:
        raise ValueError(
            f"cannot combine models over {model_a.n_spins} and {model_b.n_spins} spins"
        )
    return IsingModel(
        model_a.n_spins,
        model_a.c + scale * model_b.c,
        model_a.h + scale * model_b.h,
        model_a.J + scale * model_b.J,
    )


def index_to_spins(index: int, n_spins: int) -> np.ndarray:
    bits = (index >> np.arange(n_spins)) & 1
    return (2 * bits - 1).astype(np.int8)


def bits_to_index(bits: Sequence[int]) -> int:
    return int(sum(int(b) << k for k, b in enumerate(bits)))
