"""Moment tensors of the kernel and the gradient expansion of the nonlocal work.

Both the full neighborhood sum and the moments are evaluated on the same
set of quadrature nodes (a midpoint sub-grid of the support, or the lattice
neighbors of a particle). The difference between the two is then the pure
Taylor truncation error of the expansion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, TruncatedSupportWarning, UnsupportedOrderError
from .fields import PlacementField
from .identities import MAX_RECURSION_ORDER, l_recursion
from .interaction import Kernel, VirtualField
from .lattice import ParticleSystem
from .multiindex import SymTensor, monomials

__all__ = [
    "Neighborhood",
    "MomentSet",
    "ExpansionRow",
    "quadrature_neighborhood",
    "lattice_neighborhood",
    "moment_tensors",
    "full_work_density",
    "gradient_expansion_work",
    "expansion_residual",
]

MAX_MOMENT_ORDER = 6


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Weighted reference offsets ``r`` around ``X`` with current distances."""

    X: np.ndarray
    offsets: np.ndarray
    weights: np.ndarray  # mu * dV per node
    rho: np.ndarray
    rho0: np.ndarray
    lam: np.ndarray
    warnings: tuple = ()


@dataclass(frozen=True)
class MomentSet:
    X: np.ndarray
    tensors: dict
    warnings: tuple = ()
    n_nodes: int = 0

    @property
    def nmax(self) -> int:
        return max(self.tensors)

    def __getitem__(self, order: int) -> SymTensor:
        return self.tensors[order]


@dataclass(frozen=True)
class ExpansionRow:
    horizon: float
    nmax: int
    full_work: float
    truncated_work: float
    residual: float
    est_order: float = float("nan")


def _current_distance(pf: PlacementField | None, X, r):
    if pf is None:
        return np.sqrt(np.sum(r * r, axis=-1))
    d = pf.value(X + r) - pf.value(X)
    return np.sqrt(np.sum(d * d, axis=-1))


def quadrature_neighborhood(
    kernel: Kernel, pf: PlacementField | None, X, resolution: int, mu: float = 1.0
) -> Neighborhood:
    """Midpoint nodes of a ``resolution``^3 sub-grid of the cube [X - delta, X + delta].

    Nodes outside the kernel support or at r = 0 are dropped. Nodes outside
    the field domain are dropped too, with a :class:`TruncatedSupportWarning`.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    X = np.asarray(X, dtype=float)
    step = 2.0 * kernel.delta / resolution
    # half-integer multiples keep the node set exactly centro-symmetric
    ticks = (np.arange(resolution) - (resolution - 1) / 2.0) * step
    g = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    r = np.stack([c.ravel() for c in g], axis=-1)
    keep = kernel.in_support(r) & np.any(r != 0.0, axis=-1)
    notes = []
    if pf is not None:
        pts = X + r
        lo, hi = np.asarray(pf.box.lo), np.asarray(pf.box.hi)
        inside = np.all((pts >= lo) & (pts <= hi), axis=-1)
        if np.any(keep & ~inside):
            msg = f"kernel support around {X.tolist()} leaves the field domain"
            warnings.warn(msg, TruncatedSupportWarning, stacklevel=2)
            notes.append(msg)
        keep &= inside
    r = r[keep]
    rho0 = np.sqrt(np.sum(r * r, axis=-1))
    rho = _current_distance(pf, X, r)
    w = np.full(len(r), mu * step**3)
    return Neighborhood(X, r, w, rho, rho0, kernel.lam(rho, rho0), tuple(notes))


def lattice_neighborhood(system: ParticleSystem, kernel: Kernel, i: int) -> Neighborhood:
    """Neighbors of particle ``i`` with weights mu V_j and current distances."""
    j = system.neighbors(i)
    r = system.ref[j] - system.ref[i]
    d = system.pos[j] - system.pos[i]
    rho = np.sqrt(np.sum(d * d, axis=-1))
    rho0 = system.rho0[i][system.mask[i]]
    w = system.mu * system.volume[j]
    return Neighborhood(system.ref[i].copy(), r, w, rho, rho0, kernel.lam(rho, rho0))


def _moments(nb: Neighborhood, nmax: int) -> MomentSet:
    if not 2 <= nmax <= MAX_MOMENT_ORDER:
        raise UnsupportedOrderError(f"Nmax must lie in 2..{MAX_MOMENT_ORDER}, got {nmax}")
    wl = nb.weights * nb.lam
    tensors = {n: SymTensor(n, wl @ monomials(nb.offsets, n)) for n in range(2, nmax + 1)}
    return MomentSet(nb.X, tensors, nb.warnings, len(nb.offsets))


def moment_tensors(
    kernel: Kernel,
    X,
    source=None,
    nmax: int = 4,
    resolution: int = 32,
    mu: float = 1.0,
) -> MomentSet:
    """T^N = sum over nodes of Lambda * r^{(x)N} * mu dV, for N = 2..nmax.

    ``source`` is a :class:`PlacementField` (or None for the reference
    placement) for midpoint quadrature, or a :class:`ParticleSystem` whose
    particle at reference position ``X`` supplies the nodes.
    """
    X = np.asarray(X, dtype=float)
    if isinstance(source, ParticleSystem):
        i = int(np.argmin(np.sum((source.ref - X) ** 2, axis=-1)))
        if not np.allclose(source.ref[i], X, rtol=0, atol=1e-9 * max(1.0, source.h)):
            raise ValueError(f"no particle at reference position {X.tolist()}")
        return _moments(lattice_neighborhood(source, kernel, i), nmax)
    return _moments(quadrature_neighborhood(kernel, source, X, resolution, mu), nmax)


def full_work_density(pf: PlacementField, deltachi: VirtualField, nb: Neighborhood) -> float:
    """Neighborhood sum of Lambda * delta(rho^2) at the base point."""
    X = nb.X
    d = pf.value(X + nb.offsets) - pf.value(X)
    dv = deltachi.value(X + nb.offsets) - deltachi.value(X)
    drho2 = 2.0 * np.sum(d * dv, axis=-1)
    return float(np.sum(nb.weights * nb.lam * drho2))


def _delta_l(pf: PlacementField, deltachi: VirtualField, X, n: int, s: float) -> SymTensor:
    # L_n is quadratic in chi, so the symmetric difference is exact up to round-off
    plus = l_recursion(pf.superpose(deltachi.shape, s), X, n)
    minus = l_recursion(pf.superpose(deltachi.shape, -s), X, n)
    return (plus - minus) * (deltachi.eps / (2.0 * s))


def gradient_expansion_work(
    pf: PlacementField,
    deltachi: VirtualField,
    momentset: MomentSet,
    nmax: int,
    s: float = 1e-3,
) -> float:
    """sum_{N=2}^{nmax} (1/N!) <delta L_N | T^N> at the moment set's base point."""
    if not 2 <= nmax <= min(MAX_RECURSION_ORDER, momentset.nmax):
        raise UnsupportedOrderError(f"Nmax {nmax} not available")
    total = 0.0
    for n in range(2, nmax + 1):
        dl = _delta_l(pf, deltachi, momentset.X, n, s)
        total += dl.contract(momentset[n]) / math.factorial(n)
    return total


def expansion_residual(
    pf: PlacementField,
    deltachi: VirtualField,
    kernel: Kernel,
    X,
    nmax: int,
    horizons,
    resolution: int = 24,
    mu: float = 1.0,
) -> list[ExpansionRow]:
    """Truncation residual |full - expansion| for each horizon in ``horizons``.

    The estimated order between consecutive rows is
    log(res_prev / res) / log(delta_prev / delta).
    """
    horizons = [float(h) for h in horizons]
    if len(horizons) < 2:
        raise InsufficientDataError("need at least two horizons")
    if any(b >= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be strictly decreasing")
    rows: list[ExpansionRow] = []
    for delta in horizons:
        k = kernel.with_horizon(delta)
        nb = quadrature_neighborhood(k, pf, X, resolution, mu)
        full = full_work_density(pf, deltachi, nb)
        trunc = gradient_expansion_work(pf, deltachi, _moments(nb, nmax), nmax)
        res = abs(full - trunc)
        order = float("nan")
        if rows:
            prev = rows[-1]
            if res > 0 and prev.residual > 0:
                order = math.log(prev.residual / res) / math.log(prev.horizon / delta)
        rows.append(ExpansionRow(delta, nmax, full, trunc, res, order))
    return rows
