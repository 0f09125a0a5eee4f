"""Truncated multivariate Taylor jets in three variables.

A :class:`Jet` stores the Taylor coefficients ``d^m f(X) / m!`` of a tensor
valued function for every multi-index ``m`` of total degree ``<= order``.
Products follow the Cauchy rule, differentiation shifts coefficients and
drops one degree. This is what lets the recursion lemmas be evaluated
exactly from the derivatives of C without finite differences.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .multiindex import MultiIndex, multi_indices

__all__ = ["Jet", "einsum", "inverse_matrix", "jet_basis"]

_COEF_LETTERS = "xyz"


@lru_cache(maxsize=None)
def jet_basis(order: int) -> tuple[MultiIndex, ...]:
    """Multi-indices of total degree 0..order, graded."""
    out = []
    for k in range(order + 1):
        out.extend(multi_indices(k))
    return tuple(out)


@lru_cache(maxsize=None)
def _positions(order: int) -> dict:
    return {m: i for i, m in enumerate(jet_basis(order))}


@lru_cache(maxsize=None)
def _product_table(order: int) -> np.ndarray:
    basis = jet_basis(order)
    pos = _positions(order)
    n = len(basis)
    table = np.zeros((n, n, n))
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if a.order + b.order > order:
                continue
            k = pos[MultiIndex(a.n1 + b.n1, a.n2 + b.n2, a.n3 + b.n3)]
            table[i, j, k] = 1.0
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def _shift_table(order: int, axis: int):
    """Source positions and factors for d/dX^axis of an order-``order`` jet."""
    src_pos = _positions(order)
    target = jet_basis(order - 1)
    src = np.empty(len(target), dtype=int)
    fac = np.empty(len(target))
    for k, m in enumerate(target):
        e = list(m.exponents)
        e[axis] += 1
        src[k] = src_pos[MultiIndex(*e)]
        fac[k] = e[axis]
    return src, fac


class Jet:
    """Taylor jet with tensor-valued coefficients.

    ``coef`` has shape ``tensor_shape + (n_coefficients,)``.
    """

    __slots__ = ("coef", "order")

    def __init__(self, coef: np.ndarray, order: int):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[-1] != len(jet_basis(order)):
            raise ValueError("coefficient axis does not match jet order")
        self.coef = coef
        self.order = order

    @classmethod
    def from_derivatives(cls, derivs) -> "Jet":
        """Build from exact derivative arrays ``derivs[k]`` of shape tshape + (3,)*k."""
        order = len(derivs) - 1
        tshape = np.shape(derivs[0])
        coef = np.empty(tshape + (len(jet_basis(order)),))
        for p, m in enumerate(jet_basis(order)):
            d = np.asarray(derivs[m.order])
            comp = d[(Ellipsis,) + m.index_tuple()]
            coef[..., p] = comp / (
                math.factorial(m.n1) * math.factorial(m.n2) * math.factorial(m.n3)
            )
        return cls(coef, order)

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (len(jet_basis(order)),))
        coef[..., 0] = value
        return cls(coef, order)

    @property
    def tshape(self) -> tuple:
        return self.coef.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.coef[..., 0]

    def derivative_tensor(self, k: int) -> np.ndarray:
        """Dense k-th derivative array at the base point, shape tshape + (3,)*k."""
        if k > self.order:
            raise ValueError("derivative order exceeds jet order")
        out = np.empty(self.tshape + (3,) * k)
        pos = _positions(self.order)
        for idx in itertools.product(range(3), repeat=k):
            m = MultiIndex.from_indices(idx)
            scale = math.factorial(m.n1) * math.factorial(m.n2) * math.factorial(m.n3)
            out[(Ellipsis,) + idx] = self.coef[..., pos[m]] * scale
        return out

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise jet order")
        return Jet(self.coef[..., : len(jet_basis(order))], order)

    def diff(self, axis: int) -> "Jet":
        """Partial derivative along reference axis ``axis``."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _shift_table(self.order, axis)
        return Jet(self.coef[..., src] * fac, self.order - 1)

    def grad(self) -> "Jet":
        """Gradient with the derivative index appended as the last tensor axis."""
        parts = [self.diff(a).coef for a in range(3)]
        return Jet(np.stack(parts, axis=-2), self.order - 1)

    def transpose(self, axes) -> "Jet":
        axes = tuple(axes) + (len(self.tshape),)
        return Jet(np.transpose(self.coef, axes), self.order)

    def __add__(self, other: "Jet") -> "Jet":
        k = min(self.order, other.order)
        n = len(jet_basis(k))
        return Jet(self.coef[..., :n] + other.coef[..., :n], k)

    def __sub__(self, other: "Jet") -> "Jet":
        k = min(self.order, other.order)
        n = len(jet_basis(k))
        return Jet(self.coef[..., :n] - other.coef[..., :n], k)

    def __mul__(self, scalar) -> "Jet":
        return Jet(self.coef * float(scalar), self.order)

    __rmul__ = __mul__

    def __neg__(self) -> "Jet":
        return Jet(-self.coef, self.order)


def einsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Jet product with tensor contraction given in einsum notation.

    Only the tensor indices appear in ``subscripts``; the Taylor
    coefficient axes are handled by the Cauchy product.
    """
    if any(c in subscripts for c in _COEF_LETTERS):
        raise ValueError(f"letters {_COEF_LETTERS!r} are reserved")
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    k = min(a.order, b.order)
    n = len(jet_basis(k))
    table = _product_table(k)
    coef = np.einsum(
        f"{sa}x,{sb}y,xyz->{out}z",
        a.coef[..., :n],
        b.coef[..., :n],
        table,
        optimize=True,
    )
    return Jet(coef, k)


def inverse_matrix(c: Jet) -> Jet:
    """Jet of the inverse of a 3x3 matrix-valued jet."""
    if c.tshape != (3, 3):
        raise ValueError("inverse_matrix expects a 3x3 jet")
    basis = jet_basis(c.order)
    pos = _positions(c.order)
    inv0 = np.linalg.inv(c.coef[..., 0])
    out = np.zeros_like(c.coef)
    out[..., 0] = inv0
    for p, m in enumerate(basis):
        if p == 0:
            continue
        acc = np.zeros((3, 3))
        # sum over splits m = u + w with u != 0
        for u in basis:
            if u.order == 0 or u.order > m.order:
                continue
            w = (m.n1 - u.n1, m.n2 - u.n2, m.n3 - u.n3)
            if min(w) < 0:
                continue
            acc += c.coef[..., pos[u]] @ out[..., pos[MultiIndex(*w)]]
        out[..., p] = -inv0 @ acc
    return Jet(out, c.order)
