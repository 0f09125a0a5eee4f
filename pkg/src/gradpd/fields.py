"""Analytic placement fields and pointwise kinematics.

Every field variant carries closed-form derivatives of all orders, so the
Green tensor C = F^T F and its gradients are available exactly. The
finite-difference helper :func:`rho2_partial_fd` exists only as an
independent oracle for tests and verification runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateDeformationError, DomainError
from .jets import Jet, einsum
from .multiindex import MultiIndex

__all__ = [
    "Box",
    "AffineMap",
    "QuadraticShearMap",
    "TrigonometricMap",
    "SuperposedMap",
    "PlacementField",
    "DeformationState",
    "identity",
    "affine",
    "quadratic_shear",
    "trigonometric",
    "eval_derivatives",
    "deformation_state",
    "rho_squared",
    "rho2_partial_fd",
    "green_jet",
    "placement_jet",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in reference coordinates."""

    lo: tuple = (-1.0, -1.0, -1.0)
    hi: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, X, pad: float = 0.0) -> bool:
        X = np.asarray(X, dtype=float)
        return bool(
            np.all(X >= np.asarray(self.lo) - pad) and np.all(X <= np.asarray(self.hi) + pad)
        )

    def grid(self, n: int) -> np.ndarray:
        axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack([c.ravel() for c in g], axis=-1)

    def sample(self, rng: np.random.Generator, n: int, margin: float = 0.0) -> np.ndarray:
        lo = np.asarray(self.lo) + margin
        hi = np.asarray(self.hi) - margin
        return lo + (hi - lo) * rng.random((n, 3))


# -- analytic maps ---------------------------------------------------------
#
# A map exposes ``value(X)`` (vectorized over leading axes) and
# ``derivatives(X, order)`` returning [chi, F, d2chi, ...] with the k-th
# entry of shape (3,) + (3,)*k: component index first, derivative slots after.


@dataclass(frozen=True)
class AffineMap:
    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))
    shift: np.ndarray = field(default_factory=lambda: np.zeros(3))
    kind: str = "affine"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float).reshape(3, 3)
        s = np.array(self.shift, dtype=float).reshape(3)
        m.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", s)

    def value(self, X):
        return np.asarray(X, dtype=float) @ self.matrix.T + self.shift

    def derivatives(self, X, order):
        out = [self.value(X)]
        if order >= 1:
            out.append(self.matrix.copy())
        for k in range(2, order + 1):
            out.append(np.zeros((3,) + (3,) * k))
        return out


@dataclass(frozen=True)
class QuadraticShearMap:
    """chi = (a + gamma b^2 / 2, b, c)."""

    gamma: float
    kind: str = "shear2"

    def value(self, X):
        X = np.asarray(X, dtype=float)
        out = X.copy()
        out[..., 0] = X[..., 0] + 0.5 * self.gamma * X[..., 1] ** 2
        return out

    def derivatives(self, X, order):
        X = np.asarray(X, dtype=float)
        out = [self.value(X)]
        if order >= 1:
            F = np.eye(3)
            F[0, 1] = self.gamma * X[1]
            out.append(F)
        if order >= 2:
            G = np.zeros((3, 3, 3))
            G[0, 1, 1] = self.gamma
            out.append(G)
        for k in range(3, order + 1):
            out.append(np.zeros((3,) + (3,) * k))
        return out


@dataclass(frozen=True)
class TrigonometricMap:
    """chi = X + sum_m A_m sin(k_m . X + phi_m)  (identity part optional)."""

    amplitudes: np.ndarray
    wavevectors: np.ndarray
    phases: np.ndarray
    with_identity: bool = True
    kind: str = "trig"

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.amplitudes, dtype=float))
        K = np.atleast_2d(np.array(self.wavevectors, dtype=float))
        P = np.atleast_1d(np.array(self.phases, dtype=float))
        if A.shape != K.shape or A.shape[1] != 3 or P.shape != (A.shape[0],):
            raise ValueError("amplitudes/wavevectors must be (M,3), phases (M,)")
        for a in (A, K, P):
            a.setflags(write=False)
        object.__setattr__(self, "amplitudes", A)
        object.__setattr__(self, "wavevectors", K)
        object.__setattr__(self, "phases", P)

    def value(self, X):
        X = np.asarray(X, dtype=float)
        theta = X @ self.wavevectors.T + self.phases
        out = np.sin(theta) @ self.amplitudes
        return X + out if self.with_identity else out

    def derivatives(self, X, order):
        X = np.asarray(X, dtype=float)
        theta = self.wavevectors @ X + self.phases
        s, c = np.sin(theta), np.cos(theta)
        cycle = (s, c, -s, -c)
        out = []
        for k in range(order + 1):
            # sum_m A_m (x) k_m^{(x)k} sin^{(k)}(theta_m)
            acc = np.zeros((3,) + (3,) * k)
            for A, kv, w in zip(self.amplitudes, self.wavevectors, cycle[k % 4]):
                t = A * w
                for _ in range(k):
                    t = np.multiply.outer(t, kv)
                acc += t
            if self.with_identity and k == 0:
                acc = acc + X
            elif self.with_identity and k == 1:
                acc = acc + np.eye(3)
            out.append(acc)
        return out


@dataclass(frozen=True)
class SuperposedMap:
    """chi = base + scale * perturbation."""

    base: object
    perturbation: object
    scale: float
    kind: str = "superposed"

    def value(self, X):
        return self.base.value(X) + self.scale * self.perturbation.value(X)

    def derivatives(self, X, order):
        a = self.base.derivatives(X, order)
        b = self.perturbation.derivatives(X, order)
        return [u + self.scale * v for u, v in zip(a, b)]


# -- placement field -------------------------------------------------------


_VALIDATION_GRID = 5


@dataclass(frozen=True)
class PlacementField:
    """Analytic placement map restricted to a reference domain box.

    Construction checks det F > 0 on a 5x5x5 grid of the box.
    """

    map: object
    box: Box = field(default_factory=Box)
    validate: bool = True

    def __post_init__(self):
        if self.validate:
            for X in self.box.grid(_VALIDATION_GRID):
                J = np.linalg.det(self.map.derivatives(X, 1)[1])
                if not J > 0.0:
                    raise DegenerateDeformationError(
                        f"det F = {J:.3e} <= 0 at X = {X.tolist()}"
                    )

    @property
    def kind(self) -> str:
        return self.map.kind

    def value(self, X):
        return self.map.value(X)

    def check_inside(self, X, what="point"):
        if not self.box.contains(X):
            raise DomainError(f"{what} {np.asarray(X).tolist()} outside domain {self.box}")

    def superpose(self, perturbation, scale: float) -> "PlacementField":
        """chi + scale * perturbation, unvalidated (small perturbations)."""
        return PlacementField(SuperposedMap(self.map, perturbation, scale), self.box, validate=False)


def identity(box: Box | None = None) -> PlacementField:
    m = AffineMap(np.eye(3), np.zeros(3), kind="identity")
    return PlacementField(m, box or Box())


def affine(F0, box: Box | None = None, shift=(0.0, 0.0, 0.0)) -> PlacementField:
    return PlacementField(AffineMap(F0, shift), box or Box())


def quadratic_shear(gamma: float, box: Box | None = None) -> PlacementField:
    return PlacementField(QuadraticShearMap(float(gamma)), box or Box())


def trigonometric(amplitudes, wavevectors, phases=None, box: Box | None = None) -> PlacementField:
    A = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    if phases is None:
        phases = np.zeros(A.shape[0])
    return PlacementField(TrigonometricMap(A, wavevectors, phases), box or Box())


# -- kinematics ------------------------------------------------------------


def eval_derivatives(pf: PlacementField, X, order: int) -> list:
    """Exact derivatives [chi, F, d2chi, ...] of the placement at ``X``."""
    if order < 0:
        raise ValueError("order must be >= 0")
    X = np.asarray(X, dtype=float)
    pf.check_inside(X)
    return pf.map.derivatives(X, order)


@dataclass(frozen=True)
class DeformationState:
    F: np.ndarray
    C: np.ndarray
    gradC: np.ndarray  # gradC[a, b, g] = dC_ab / dX^g
    grad2C: np.ndarray  # grad2C[a, b, g, d] = d2C_ab / dX^g dX^d
    H: float
    Finv: np.ndarray  # Finv[alpha, i]: Finv @ F = I

    @property
    def t(self) -> np.ndarray:
        """The six independent components (C11, C22, C33, C12, C13, C23)."""
        C = self.C
        return np.array([C[0, 0], C[1, 1], C[2, 2], C[0, 1], C[0, 2], C[1, 2]])

    @property
    def dt(self) -> np.ndarray:
        """dt[k, g]: derivative of the k-th component of :attr:`t` along X^g."""
        g = self.gradC
        return np.array([g[0, 0], g[1, 1], g[2, 2], g[0, 1], g[0, 2], g[1, 2]])


def deformation_state(pf: PlacementField, X) -> DeformationState:
    d = eval_derivatives(pf, X, 3)
    return state_from_derivatives(d)


def state_from_derivatives(d) -> DeformationState:
    F, G, T = d[1], d[2], d[3]
    H = float(np.linalg.det(F))
    if not H > 0.0:
        raise DegenerateDeformationError(f"det F = {H:.3e} <= 0")
    C = F.T @ F
    gradC = np.einsum("iag,ib->abg", G, F) + np.einsum("ia,ibg->abg", F, G)
    grad2C = (
        np.einsum("iagd,ib->abgd", T, F)
        + np.einsum("iag,ibd->abgd", G, G)
        + np.einsum("iad,ibg->abgd", G, G)
        + np.einsum("ia,ibgd->abgd", F, T)
    )
    Finv = np.linalg.inv(F)
    for a in (F, C, gradC, grad2C, Finv):
        a.setflags(write=False)
    return DeformationState(F=F, C=C, gradC=gradC, grad2C=grad2C, H=H, Finv=Finv)


def placement_jet(pf: PlacementField, X, order: int) -> Jet:
    return Jet.from_derivatives(eval_derivatives(pf, X, order))


def green_jet(pf: PlacementField, X, order: int) -> Jet:
    """Taylor jet of C = F^T F at ``X`` through total degree ``order``.

    Built from exact placement derivatives up to ``order + 1``.
    """
    F = placement_jet(pf, X, order + 1).grad()  # F[i, a]
    return einsum("ia,ib->ab", F, F)


def rho_squared(pf: PlacementField, X, Xbar) -> float:
    """Squared current distance between the placements of X and Xbar."""
    pf.check_inside(X)
    pf.check_inside(Xbar)
    d = pf.value(np.asarray(Xbar, dtype=float)) - pf.value(np.asarray(X, dtype=float))
    return float(d @ d)


@lru_cache(maxsize=None)
def _central_stencil(p: int):
    """Offsets and weights of the minimal second-order central stencil for d^p/dx^p."""
    if p == 0:
        return np.array([0]), np.array([1.0])
    r = (p + 1) // 2
    offs = np.arange(-r, r + 1)
    V = np.vander(offs.astype(float), increasing=True).T  # V[q, j] = offs_j^q
    rhs = np.zeros(len(offs))
    rhs[p] = math.factorial(p)
    w = np.linalg.solve(V, rhs)
    keep = np.abs(w) > 1e-14
    return offs[keep], w[keep]


def _fd_once(pf, X, Xbar, m, h):
    axes = []
    for p in m:
        offs, w = _central_stencil(p)
        axes.append((offs, w))
    o1, o2, o3 = np.meshgrid(axes[0][0], axes[1][0], axes[2][0], indexing="ij")
    w = np.einsum("i,j,k->ijk", axes[0][1], axes[1][1], axes[2][1])
    pts = Xbar + h * np.stack([o1.ravel(), o2.ravel(), o3.ravel()], axis=-1)
    diff = pf.value(pts) - pf.value(X)
    vals = np.einsum("ij,ij->i", diff, diff)
    return float(np.dot(w.ravel(), vals)) / h ** sum(m)


def rho2_partial_fd(pf: PlacementField, X, Xbar, m, h: float, richardson: bool | None = None) -> float:
    """Central-difference estimate of d^|m| rho^2 / dXbar^m at fixed X.

    Orders >= 3 use one Richardson step (h, h/2) by default.
    """
    m = m.exponents if isinstance(m, MultiIndex) else tuple(int(v) for v in m)
    X = np.asarray(X, dtype=float)
    Xbar = np.asarray(Xbar, dtype=float)
    pf.check_inside(X)
    reach = np.array([(p + 1) // 2 for p in m]) * h
    if not (pf.box.contains(Xbar - reach) and pf.box.contains(Xbar + reach)):
        raise DomainError(f"finite-difference stencil around {Xbar.tolist()} leaves the domain")
    if richardson is None:
        richardson = sum(m) >= 3
    coarse = _fd_once(pf, X, Xbar, m, h)
    if not richardson:
        return coarse
    fine = _fd_once(pf, X, Xbar, m, h / 2)
    return (4.0 * fine - coarse) / 3.0
