"""Explicit time integration of the particle strong form and the horizon study.

The equation of motion per particle is ``a_i = b(X_i, t) + f_i``, with
``f_i`` the mass-specific internal force of :func:`internal_force_density`,
integrated by velocity Verlet.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    DivergenceError,
    InsufficientDataError,
    SkinEffectError,
    StabilityWarning,
)
from .fields import Box, PlacementField, eval_derivatives
from .interaction import Kernel, internal_force_density, potential_energy
from .lattice import ParticleSystem, build_lattice

__all__ = [
    "BodyForce",
    "Diagnostics",
    "TraceRecord",
    "SimulationTrace",
    "ConvergenceRow",
    "step",
    "stable_dt",
    "diagnostics",
    "run",
    "second_moment_stress",
    "local_limit_force",
    "horizon_convergence_study",
]

SAFETY_FACTOR = 0.5


@dataclass(frozen=True)
class BodyForce:
    """Mass-specific external force b(X, t); ``fn`` maps (X (N,3), t) to (N,3)."""

    fn: Callable | None = None

    @classmethod
    def zero(cls) -> "BodyForce":
        return cls(None)

    @classmethod
    def uniform(cls, b) -> "BodyForce":
        b = np.asarray(b, dtype=float).reshape(3)
        return cls(lambda X, t: np.broadcast_to(b, np.shape(X)))

    def __call__(self, X, t) -> np.ndarray:
        if self.fn is None:
            return np.zeros(np.shape(X))
        return np.asarray(self.fn(X, t), dtype=float)


def _acceleration(system, kernel, body, t, threads):
    a = internal_force_density(system, kernel, threads=threads)
    if body.fn is not None:
        a = a + body(system.ref, t)
    return a


def step(
    system: ParticleSystem,
    kernel: Kernel,
    body: BodyForce,
    dt: float,
    threads: int = 1,
    index: int = 1,
) -> ParticleSystem:
    """One velocity-Verlet step; ``index`` labels the step in divergence errors."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    a0 = system.accel
    if a0 is None:
        a0 = _acceleration(system, kernel, body, system.time, threads)
    half = 0.5 * dt
    v_half = system.vel + half * a0
    pos = system.pos + dt * v_half
    moved = system.with_state(pos=pos, vel=v_half, time=system.time + dt)
    a1 = _acceleration(moved, kernel, body, moved.time, threads)
    vel = v_half + half * a1
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
        raise DivergenceError(index)
    return moved.with_state(vel=vel, accel=a1)


def stable_dt(system: ParticleSystem, kernel: Kernel, safety: float = SAFETY_FACTOR) -> float:
    """safety * sqrt(2 / k_max), k_i = sum_j K'(rho0_ij) mu V_j.

    ``k_i`` is the mass-specific bond stiffness seen by particle i; returns
    ``inf`` with a :class:`StabilityWarning` when no particle has bonds.
    """
    if not system.mask.any():
        warnings.warn("no bonds in the system; no time-step limit", StabilityWarning, stacklevel=2)
        return math.inf
    kp = np.where(system.mask, kernel.stiffness(system.rho0, system.rho0), 0.0)
    k = np.sum(kp * (system.mu * system.volume[system.nbr]), axis=1)
    return safety * math.sqrt(2.0 / float(np.max(k)))


@dataclass(frozen=True)
class Diagnostics:
    momentum: np.ndarray
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


def diagnostics(system: ParticleSystem, kernel: Kernel) -> Diagnostics:
    m = system.mu * system.volume
    p = np.sum(m[:, None] * system.vel, axis=0)
    ke = 0.5 * float(np.sum(m * np.sum(system.vel * system.vel, axis=1)))
    return Diagnostics(p, ke, potential_energy(system, kernel))


@dataclass(frozen=True)
class TraceRecord:
    step: int
    time: float
    momentum: tuple
    kinetic: float
    potential: float
    total: float


@dataclass(frozen=True)
class SimulationTrace:
    records: tuple

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def momentum(self) -> np.ndarray:
        return np.array([r.momentum for r in self.records])


def _record(k, system, kernel) -> TraceRecord:
    d = diagnostics(system, kernel)
    return TraceRecord(k, system.time, tuple(float(v) for v in d.momentum), d.kinetic, d.potential, d.total)


def run(
    system: ParticleSystem,
    kernel: Kernel,
    body: BodyForce,
    dt: float,
    steps: int,
    threads: int = 1,
    every: int = 1,
):
    """Integrate ``steps`` steps; returns (final system, trace including step 0)."""
    recs = [_record(0, system, kernel)]
    for k in range(1, steps + 1):
        system = step(system, kernel, body, dt, threads=threads, index=k)
        if k % every == 0 or k == steps:
            recs.append(_record(k, system, kernel))
    return system, SimulationTrace(tuple(recs))


# -- local limit -----------------------------------------------------------
#
# For a smooth placement the bond sum at X expands as
#   f(X) = 2 sum_j w_j grad_y(Lambda(|y|) y) . (G : r_j r_j) + O(delta^2 f),
# with y = F r_j; the leading odd term cancels on a centro-symmetric
# neighborhood. This is (1/mu) Div P for the second-moment stress
# P / mu = 2 sum_j w_j Lambda(|F r_j|) (F r_j) (x) r_j.


def second_moment_stress(kernel: Kernel, F, offsets, weights) -> np.ndarray:
    """Mass-specific nominal stress 2 F T^2 of a homogeneous deformation F."""
    y = offsets @ np.asarray(F).T
    rho = np.sqrt(np.sum(y * y, axis=1))
    rho0 = np.sqrt(np.sum(offsets * offsets, axis=1))
    lam = kernel.lam(rho, rho0)
    return 2.0 * np.einsum("j,ji,jb->ib", weights * lam, y, offsets)


def local_limit_force(kernel: Kernel, pf: PlacementField, X, offsets, weights) -> np.ndarray:
    """Divergence of :func:`second_moment_stress` at X, from exact F and grad F."""
    d = eval_derivatives(pf, X, 2)
    F, G = d[1], d[2]
    y = offsets @ F.T
    g = np.einsum("kab,ja,jb->jk", G, offsets, offsets)
    rho = np.sqrt(np.sum(y * y, axis=1))
    rho0 = np.sqrt(np.sum(offsets * offsets, axis=1))
    lam = kernel.lam(rho, rho0)
    dlam = kernel.lam_derivative(rho, rho0)
    yg = np.sum(y * g, axis=1)
    terms = lam[:, None] * g + (dlam * yg / rho)[:, None] * y
    return 2.0 * np.sum(weights[:, None] * terms, axis=0)


@dataclass(frozen=True)
class ConvergenceRow:
    horizon: float
    h: float
    max_error: float
    est_order: float = float("nan")


def _patch(pf: PlacementField, center, h, delta, reach, mu) -> ParticleSystem:
    n = math.ceil((delta + reach) / h - 1e-9) + 1
    half = (n + 0.5) * h
    box = Box(tuple(center - half), tuple(center + half))
    if not (pf.box.contains(box.lo) and pf.box.contains(box.hi)):
        raise SkinEffectError(
            f"evaluation points need a lattice of half-width {half} around {center.tolist()}, "
            "which leaves the field domain"
        )
    return build_lattice(box, h, delta, mu).with_placement(pf)


def horizon_convergence_study(
    pf: PlacementField,
    kernel: Kernel,
    hs,
    m: float = 3.0,
    center=None,
    offsets=None,
    mu: float = 1.0,
    scale_stiffness: bool = True,
    threads: int = 1,
) -> list[ConvergenceRow]:
    """Error of the bond force against its local limit as the horizon shrinks.

    Every level uses ``delta = m h``. Evaluation points are
    ``center + hs[0] * offsets`` (default: the 27 points of a 3x3x3 block),
    each an interior particle of a lattice patch. With ``scale_stiffness``
    the kernel stiffness scales as ``delta^-4`` so the local limit does not
    depend on the level.
    """
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise InsufficientDataError("a convergence study needs at least 3 refinement levels")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigError("lattice spacings must be strictly decreasing")
    box = pf.box
    center = (np.asarray(box.lo) + np.asarray(box.hi)) / 2 if center is None else np.asarray(center, float)
    if offsets is None:
        g = np.meshgrid(*([np.arange(-1, 2)] * 3), indexing="ij")
        offsets = np.stack([c.ravel() for c in g], axis=-1)
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 3)
    reach = hs[0] * float(np.max(np.abs(offsets))) if len(offsets) else 0.0
    delta0 = m * hs[0]
    rows: list[ConvergenceRow] = []
    for h in hs:
        ratio = hs[0] / h
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"h = {h} does not divide the coarsest spacing {hs[0]}")
        delta = m * h
        k = kernel.with_horizon(delta, kernel.c * (delta0 / delta) ** 4 if scale_stiffness else None)
        system = _patch(pf, center, h, delta, reach, mu)
        targets = center + hs[0] * offsets
        idx = np.argmin(
            np.sum((system.ref[None, :, :] - targets[:, None, :]) ** 2, axis=-1), axis=1
        )
        f_nl = internal_force_density(system, k, idx, threads=threads)
        err = 0.0
        for p, i in enumerate(idx):
            j = system.neighbors(i)
            r = system.ref[j] - system.ref[i]
            f_loc = local_limit_force(k, pf, system.ref[i], r, system.mu * system.volume[j])
            err = max(err, float(np.linalg.norm(f_nl[p] - f_loc)))
        order = float("nan")
        if rows and err > 0 and rows[-1].max_error > 0:
            order = math.log(rows[-1].max_error / err) / math.log(rows[-1].horizon / delta)
        rows.append(ConvergenceRow(delta, h, err, order))
    return rows
