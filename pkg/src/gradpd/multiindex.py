"""Multi-index enumeration and totally symmetric tensors in three dimensions.

A multi-index ``(n1, n2, n3)`` of order ``N`` labels the component of a
totally symmetric order-``N`` tensor whose index tuple contains axis 0
``n1`` times, axis 1 ``n2`` times and axis 2 ``n3`` times.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "MultiIndex",
    "SymTensor",
    "multi_indices",
    "multinomial",
    "monomials",
]


@dataclass(frozen=True, order=True)
class MultiIndex:
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        if min(self.n1, self.n2, self.n3) < 0:
            raise ValueError(f"negative exponent in {self.exponents}")

    @property
    def exponents(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def order(self) -> int:
        return self.n1 + self.n2 + self.n3

    def index_tuple(self) -> tuple[int, ...]:
        """Sorted tensor index tuple, e.g. (2,1,0) -> (0, 0, 1)."""
        return (0,) * self.n1 + (1,) * self.n2 + (2,) * self.n3

    @classmethod
    def from_indices(cls, indices) -> "MultiIndex":
        counts = [0, 0, 0]
        for i in indices:
            counts[i] += 1
        return cls(*counts)

    def __iter__(self):
        return iter(self.exponents)

    def __str__(self):
        return f"{self.n1}{self.n2}{self.n3}"


@lru_cache(maxsize=None)
def multi_indices(order: int) -> tuple[MultiIndex, ...]:
    """All multi-indices of ``order`` in descending lexicographic order.

    (N,0,0) comes first and (0,0,N) last; there are (N+1)(N+2)/2 of them.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    out = []
    for n1 in range(order, -1, -1):
        for n2 in range(order - n1, -1, -1):
            out.append(MultiIndex(n1, n2, order - n1 - n2))
    return tuple(out)


def multinomial(m) -> int:
    """Number of distinct index tuples that collapse onto multi-index ``m``."""
    n1, n2, n3 = m
    return math.factorial(n1 + n2 + n3) // (
        math.factorial(n1) * math.factorial(n2) * math.factorial(n3)
    )


def monomials(r: np.ndarray, order: int) -> np.ndarray:
    """Evaluate r1^n1 r2^n2 r3^n3 for every multi-index of ``order``.

    ``r`` has shape (..., 3); the result has shape (..., n_components).
    """
    r = np.asarray(r, dtype=float)
    powers = [np.ones(r.shape[:-1] + (order + 1,)) for _ in range(3)]
    for ax in range(3):
        for p in range(1, order + 1):
            powers[ax][..., p] = powers[ax][..., p - 1] * r[..., ax]
    cols = [
        powers[0][..., m.n1] * powers[1][..., m.n2] * powers[2][..., m.n3]
        for m in multi_indices(order)
    ]
    return np.stack(cols, axis=-1)


class SymTensor:
    """Totally symmetric order-N tensor in 3-D stored by multi-index.

    Only the (N+1)(N+2)/2 independent components are kept, in the order of
    :func:`multi_indices`. The dense array returned by :meth:`to_full` is
    permutation invariant by construction.
    """

    __slots__ = ("order", "_data")

    def __init__(self, order: int, components=None):
        self.order = int(order)
        n = len(multi_indices(self.order))
        if components is None:
            data = np.zeros(n)
        else:
            data = np.array(components, dtype=float).reshape(n)
        data.setflags(write=False)
        self._data = data

    @property
    def components(self) -> np.ndarray:
        return self._data

    def __len__(self):
        return len(self._data)

    def __getitem__(self, key) -> float:
        """Component by multi-index or exponent triple, e.g. ``T[2, 0, 0]``."""
        m = key if isinstance(key, MultiIndex) else MultiIndex(*key)
        if m.order != self.order:
            raise KeyError(f"multi-index {m} has order {m.order}, tensor has {self.order}")
        return float(self._data[_position(self.order)[m]])

    def at(self, *indices: int) -> float:
        """Component by tensor index tuple, e.g. ``T.at(0, 1, 1)``."""
        if len(indices) != self.order:
            raise KeyError(f"expected {self.order} indices")
        return self[MultiIndex.from_indices(indices)]

    def items(self):
        return zip(multi_indices(self.order), self._data)

    @classmethod
    def from_full(cls, array, check: bool = False, atol: float = 0.0) -> "SymTensor":
        """Collapse a dense symmetric array onto multi-index storage.

        With ``check=True`` the array is verified to be symmetric to ``atol``.
        """
        a = np.asarray(array, dtype=float)
        order = a.ndim
        if a.shape != (3,) * order:
            raise ValueError(f"expected shape {(3,) * order}, got {a.shape}")
        if check and order > 1:
            asym = max_asymmetry(a)
            if asym > atol:
                raise ValueError(f"array not symmetric (max deviation {asym:.3e})")
        comps = [a[m.index_tuple()] for m in multi_indices(order)]
        return cls(order, comps)

    def to_full(self) -> np.ndarray:
        out = np.empty((3,) * self.order)
        pos = _position(self.order)
        for idx in itertools.product(range(3), repeat=self.order):
            out[idx] = self._data[pos[MultiIndex.from_indices(idx)]]
        return out

    def contract(self, other: "SymTensor") -> float:
        """Full contraction sum_{i1..iN} A_{i1..iN} B_{i1..iN}."""
        if other.order != self.order:
            raise ValueError("order mismatch")
        return float(np.dot(_weights(self.order), self._data * other._data))

    def __add__(self, other):
        return SymTensor(self.order, self._data + other._data)

    def __sub__(self, other):
        return SymTensor(self.order, self._data - other._data)

    def __mul__(self, scalar):
        return SymTensor(self.order, self._data * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymTensor(order={self.order}, components={self._data.tolist()})"


def max_asymmetry(a: np.ndarray) -> float:
    """Largest deviation of ``a`` from any of its index permutations."""
    worst = 0.0
    for perm in itertools.permutations(range(a.ndim)):
        worst = max(worst, float(np.max(np.abs(a - np.transpose(a, perm)))))
    return worst


@lru_cache(maxsize=None)
def _position(order: int) -> dict:
    return {m: k for k, m in enumerate(multi_indices(order))}


@lru_cache(maxsize=None)
def _weights(order: int) -> np.ndarray:
    w = np.array([multinomial(m) for m in multi_indices(order)], dtype=float)
    w.setflags(write=False)
    return w
