"""Particle discretization of a reference box with horizon neighbor tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError
from .fields import Box

__all__ = ["ParticleSystem", "build_lattice"]


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    """Particles with a padded, ascending neighbor table.

    ``nbr[i, k]`` is the k-th neighbor of particle i (ascending index);
    entries with ``mask[i, k] == False`` are padding and point at ``i``.
    """

    ref: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    volume: np.ndarray
    mu: float
    delta: float
    h: float
    nbr: np.ndarray
    mask: np.ndarray
    rho0: np.ndarray
    time: float = 0.0
    accel: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.ref)

    @property
    def mass(self) -> np.ndarray:
        return self.mu * self.volume

    def neighbors(self, i: int) -> np.ndarray:
        return self.nbr[i][self.mask[i]]

    def pairs(self):
        """Ordered pair arrays (i, j) over all listed bonds."""
        ii = np.repeat(np.arange(self.n), self.mask.sum(axis=1))
        return ii, self.nbr[self.mask]

    def with_state(self, pos=None, vel=None, time=None, accel=None) -> "ParticleSystem":
        return replace(
            self,
            pos=self.pos if pos is None else np.asarray(pos, dtype=float),
            vel=self.vel if vel is None else np.asarray(vel, dtype=float),
            time=self.time if time is None else float(time),
            accel=accel,
        )

    def with_placement(self, pf) -> "ParticleSystem":
        """Current positions chi(X) from an analytic placement field."""
        for X in (self.ref.min(axis=0), self.ref.max(axis=0)):
            pf.check_inside(X, "particle")
        return self.with_state(pos=pf.value(self.ref))

    def permuted(self, perm) -> "ParticleSystem":
        """Same system with particles relabeled by ``perm`` (new i = old perm[i])."""
        perm = np.asarray(perm)
        return ParticleSystem.from_points(
            self.ref[perm], self.volume[perm], self.mu, self.delta, h=self.h,
            pos=self.pos[perm], vel=self.vel[perm],
        )

    @classmethod
    def from_points(cls, ref, volume, mu, delta, h=None, pos=None, vel=None, grid=None):
        """Build from explicit reference points; bonds are pairs within ``delta``.

        When ``grid`` (integer lattice coordinates) is given the search runs in
        those units, so shells lying exactly on the horizon are kept.
        """
        ref = np.array(ref, dtype=float).reshape(-1, 3)
        n = len(ref)
        volume = np.broadcast_to(np.asarray(volume, dtype=float), (n,)).copy()
        if not mu > 0 or np.any(~(volume > 0)):
            raise ConfigError("mass density and volumes must be positive")
        if not delta > 0:
            raise ConfigError("horizon must be positive")
        if grid is None:
            coords, radius = ref, delta * (1 + 1e-12)
        else:
            coords, radius = np.asarray(grid, dtype=float), delta / h * (1 + 1e-12)
        lists = cKDTree(coords).query_ball_point(coords, r=radius)
        rows = [sorted(j for j in lst if j != i) for i, lst in enumerate(lists)]
        width = max(max((len(r) for r in rows), default=0), 1)
        nbr = np.tile(np.arange(n)[:, None], (1, width))
        mask = np.zeros((n, width), dtype=bool)
        for i, r in enumerate(rows):
            nbr[i, : len(r)] = r
            mask[i, : len(r)] = True
        d = ref[nbr] - ref[:, None, :]
        rho0 = np.where(mask, np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2), 1.0)
        pos = ref.copy() if pos is None else np.array(pos, dtype=float)
        vel = np.zeros_like(ref) if vel is None else np.array(vel, dtype=float)
        for a in (ref, volume, nbr, mask, rho0):
            a.setflags(write=False)
        return cls(
            ref=ref, pos=pos, vel=vel, volume=volume, mu=float(mu), delta=float(delta),
            h=float(h) if h is not None else float("nan"), nbr=nbr, mask=mask, rho0=rho0,
        )


def build_lattice(box, h: float, delta: float, mu: float) -> ParticleSystem:
    """Cubic lattice of cell-centred particles filling ``box``.

    Box edges must be integer multiples of ``h`` and ``delta >= 2h``.
    """
    if not isinstance(box, Box):
        box = Box(*box)
    if not (h > 0 and math.isfinite(h)):
        raise ConfigError("lattice spacing must be positive")
    if not delta >= 2 * h * (1 - 1e-12):
        raise ConfigError(f"horizon {delta} smaller than 2h = {2 * h}")
    counts = []
    for lo, hi in zip(box.lo, box.hi):
        q = (hi - lo) / h
        k = round(q)
        if k < 1 or abs(q - k) > 1e-9 * max(1.0, q):
            raise ConfigError(f"box edge {hi - lo} is not a positive multiple of h = {h}")
        counts.append(k)
    grid = np.stack(
        [c.ravel() for c in np.meshgrid(*[np.arange(k) for k in counts], indexing="ij")], axis=-1
    )
    ref = np.asarray(box.lo) + (grid + 0.5) * h
    return ParticleSystem.from_points(ref, h**3, mu, delta, h=h, grid=grid)
