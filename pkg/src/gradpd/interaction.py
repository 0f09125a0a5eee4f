"""Pair kernels, nonlocal virtual work and internal force density.

Sign convention: ``K > 0`` pulls particle i toward j. The micro-elastic law
``K = c (rho - rho0) / rho0 * omega(rho0)`` derives from the bond potential
``w = c (rho - rho0)^2 / (2 rho0) * omega`` so stretched bonds are restoring.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, SingularPairError
from .fields import AffineMap, PlacementField
from .lattice import ParticleSystem

__all__ = [
    "Kernel",
    "VirtualField",
    "lambda_value",
    "internal_virtual_work",
    "internal_force_density",
    "pair_arrays",
    "potential_energy",
]

FAMILIES = ("micro-elastic", "gaussian", "uniform")
INFLUENCES = ("constant", "linear")
SUPPORTS = ("ball", "box")


@dataclass(frozen=True)
class Kernel:
    """Pairwise interaction law with compact support of radius ``delta``.

    ``uniform`` is a constant ``Lambda = c`` (no bond potential); it serves
    as a moment-tensor oracle. ``support="box"`` measures the reference
    distance in the max-norm, so the support is a cube of half-width delta.
    """

    family: str = "micro-elastic"
    c: float = 1.0
    delta: float = 1.0
    ell: float | None = None
    influence: str = "constant"
    support: str = "ball"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.influence not in INFLUENCES:
            raise ConfigError(f"unknown influence function {self.influence!r}")
        if self.support not in SUPPORTS:
            raise ConfigError(f"unknown support shape {self.support!r}")
        for name in ("c", "delta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"kernel {name} must be finite and positive, got {v}")
        if self.family == "gaussian":
            if self.ell is None or not (math.isfinite(self.ell) and self.ell > 0):
                raise ConfigError("gaussian kernel needs a positive attenuation length ell")

    def with_horizon(self, delta: float, c: float | None = None) -> "Kernel":
        return replace(self, delta=float(delta), c=self.c if c is None else float(c))

    # -- support ---------------------------------------------------------
    def support_distance(self, r) -> np.ndarray:
        """Distance used for the support test, from reference offsets ``r``."""
        r = np.asarray(r, dtype=float)
        if self.support == "box":
            return np.max(np.abs(r), axis=-1)
        return np.sqrt(np.sum(r * r, axis=-1))

    def in_support(self, r) -> np.ndarray:
        return self.support_distance(r) <= self.delta * (1 + 1e-12)

    # -- constitutive law ------------------------------------------------
    def omega(self, rho0) -> np.ndarray:
        """Influence times attenuation; non-increasing in rho0."""
        rho0 = np.asarray(rho0, dtype=float)
        w = np.ones_like(rho0)
        if self.influence == "linear":
            w = np.clip(1.0 - rho0 / self.delta, 0.0, None)
        if self.family == "gaussian":
            w = w * np.exp(-((rho0 / self.ell) ** 2))
        return w

    # ``omega`` may be passed precomputed; it only depends on the reference
    # distance, and reusing one table keeps results independent of chunking.
    def force(self, rho, rho0, omega=None) -> np.ndarray:
        """Pair intensity K(rho; rho0), ignoring the support test."""
        rho = np.asarray(rho, dtype=float)
        rho0 = np.asarray(rho0, dtype=float)
        om = self.omega(rho0) if omega is None else omega
        if self.family == "uniform":
            return 4.0 * self.c * rho * om
        return self.c * (rho - rho0) / rho0 * om

    def stiffness(self, rho, rho0, omega=None) -> np.ndarray:
        """dK/drho."""
        rho = np.asarray(rho, dtype=float)
        rho0 = np.asarray(rho0, dtype=float)
        om = self.omega(rho0) if omega is None else omega
        if self.family == "uniform":
            return 4.0 * self.c * om * np.ones_like(rho)
        return self.c / rho0 * om * np.ones_like(rho)

    def potential(self, rho, rho0, omega=None) -> np.ndarray:
        """Bond potential w with dw/drho = K."""
        rho = np.asarray(rho, dtype=float)
        rho0 = np.asarray(rho0, dtype=float)
        om = self.omega(rho0) if omega is None else omega
        if self.family == "uniform":
            return 2.0 * self.c * (rho**2 - rho0**2) * om
        return self.c * (rho - rho0) ** 2 / (2.0 * rho0) * om

    def lam(self, rho, rho0) -> np.ndarray:
        """Lambda = K / (4 rho)."""
        rho = np.asarray(rho, dtype=float)
        K = self.force(rho, rho0)
        bad = (rho == 0) & (K != 0)
        if np.any(bad):
            raise SingularPairError("coincident placements with nonzero pair intensity")
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rho == 0, 0.0, K / (4.0 * np.where(rho == 0, 1.0, rho)))

    def lam_derivative(self, rho, rho0) -> np.ndarray:
        """dLambda/drho = (K' rho - K) / (4 rho^2)."""
        rho = np.asarray(rho, dtype=float)
        return (self.stiffness(rho, rho0) * rho - self.force(rho, rho0)) / (4.0 * rho**2)

    def lambda_envelope(self, rho0, max_strain: float) -> np.ndarray:
        """Bound on |Lambda| over bonds with |rho/rho0 - 1| <= max_strain."""
        rho0 = np.asarray(rho0, dtype=float)
        if not 0 <= max_strain < 1:
            raise ValueError("max_strain must lie in [0, 1)")
        if self.family == "uniform":
            return self.c * self.omega(rho0)
        return self.c * self.omega(rho0) * max_strain / (4.0 * rho0 * (1.0 - max_strain))


def lambda_value(kernel: Kernel, X, Xbar, rho: float) -> float:
    """Lambda for the pair (X, Xbar) at current distance ``rho``; 0 off support."""
    r = np.asarray(Xbar, dtype=float) - np.asarray(X, dtype=float)
    if not kernel.in_support(r):
        return 0.0
    rho0 = math.sqrt(float(r @ r))
    return float(kernel.lam(float(rho), rho0))


@dataclass(frozen=True)
class VirtualField:
    """Virtual displacement ``eps * shape(X)``; ``shape`` is any analytic map."""

    shape: object
    eps: float = 1.0

    @classmethod
    def translation(cls, vector, eps: float = 1.0) -> "VirtualField":
        return cls(AffineMap(np.zeros((3, 3)), np.asarray(vector, dtype=float), kind="translation"), eps)

    @classmethod
    def rotation(cls, axis, center=(0.0, 0.0, 0.0), eps: float = 1.0) -> "VirtualField":
        """Infinitesimal rigid rotation ``axis x (X - center)``."""
        w = np.asarray(axis, dtype=float)
        W = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
        return cls(AffineMap(W, -W @ np.asarray(center, dtype=float), kind="rotation"), eps)

    @classmethod
    def from_field(cls, pf: PlacementField, eps: float = 1.0) -> "VirtualField":
        return cls(pf.map, eps)

    def value(self, X) -> np.ndarray:
        return self.eps * self.shape.value(X)


# -- particle sums ---------------------------------------------------------


def pair_arrays(system: ParticleSystem, rows=None):
    """Current offsets, distances and masks for the padded neighbor table.

    Distances use an explicit component sum so that rho_ij == rho_ji bitwise.
    """
    rows = np.arange(system.n) if rows is None else np.asarray(rows)
    nbr = system.nbr[rows]
    mask = system.mask[rows]
    d = system.pos[nbr] - system.pos[rows][:, None, :]
    rho = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2])
    if np.any(mask & (rho == 0)):
        i = int(np.argwhere(mask & (rho == 0))[0, 0])
        raise SingularPairError(f"particle {int(rows[i])} coincides with a neighbor")
    return d, np.where(mask, rho, 1.0), mask, nbr, system.rho0[rows]


def internal_virtual_work(system: ParticleSystem, kernel: Kernel, deltachi: VirtualField) -> float:
    """Sum over ordered bonds of Lambda * delta(rho^2) * mu V_i mu V_j.

    Equals dU/d(eps) for the bond potential U, so the internal work done on
    the body is its negative.
    """
    d, rho, mask, nbr, rho0 = pair_arrays(system)
    virt = deltachi.value(system.ref)
    dv = virt[nbr] - virt[:, None, :]
    drho2 = 2.0 * np.sum(d * dv, axis=-1)
    lam = np.where(mask, kernel.lam(rho, rho0), 0.0)
    m = system.mu * system.volume
    return float(np.sum(lam * drho2 * m[:, None] * m[nbr]))


def _force_rows(system: ParticleSystem, kernel: Kernel, rows, omega) -> np.ndarray:
    d, rho, mask, nbr, rho0 = pair_arrays(system, rows)
    K = kernel.force(rho, rho0, omega[rows])
    coef = np.where(mask, K / rho, 0.0) * (system.mu * system.volume[nbr])
    contrib = coef[..., None] * d
    # fixed ascending-neighbor accumulation: independent of how rows are chunked
    acc = np.zeros((len(rows), 3))
    for k in range(contrib.shape[1]):
        acc += contrib[:, k, :]
    return acc


def internal_force_density(
    system: ParticleSystem, kernel: Kernel, i=None, threads: int = 1
) -> np.ndarray:
    """Mass-specific internal force sum_j (K_ij / rho_ij)(x_j - x_i) mu V_j.

    ``i`` may be a single index (returns a 3-vector), an index array, or
    None for all particles. Results do not depend on ``threads``.
    """
    omega = kernel.omega(system.rho0)
    if i is not None and np.ndim(i) == 0:
        return _force_rows(system, kernel, np.array([int(i)]), omega)[0]
    rows = np.arange(system.n) if i is None else np.asarray(i, dtype=int)
    if threads <= 1 or len(rows) < 2 * threads:
        return _force_rows(system, kernel, rows, omega)
    chunks = np.array_split(rows, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda r: _force_rows(system, kernel, r, omega), chunks))
    return np.concatenate(parts, axis=0)


def potential_energy(system: ParticleSystem, kernel: Kernel) -> float:
    """Half the ordered-bond sum of w(rho; rho0) mu^2 V_i V_j."""
    d, rho, mask, nbr, rho0 = pair_arrays(system)
    w = np.where(mask, kernel.potential(rho, rho0), 0.0)
    m = system.mu * system.volume
    return 0.5 * float(np.sum(w * m[:, None] * m[nbr]))
