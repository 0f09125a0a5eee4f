import math

import numpy as np
import pytest

from gradpd import fields
from gradpd.errors import DivergenceError, InsufficientDataError, SkinEffectError, StabilityWarning
from gradpd.interaction import Kernel, internal_force_density
from gradpd.lattice import ParticleSystem, build_lattice
from gradpd.simulate import (
    BodyForce,
    diagnostics,
    horizon_convergence_study,
    local_limit_force,
    run,
    second_moment_stress,
    stable_dt,
    step,
)

from conftest import make_trig

UNIT = fields.Box((0, 0, 0), (1, 1, 1))


def two_body(sep=1.1):
    s = ParticleSystem.from_points([[0, 0, 0], [1, 0, 0]], 1.0, 1.0, 2.0)
    return s.with_state(pos=np.array([[0.0, 0, 0], [sep, 0, 0]])), Kernel("micro-elastic", 1.0, 2.0)


def small_lattice():
    return build_lattice(((0, 0, 0), (0.6, 0.6, 0.6)), 0.1, 0.3, 1.0), Kernel("micro-elastic", 1.0, 0.3)


def wave_state(s):
    pert = fields.trigonometric([[0.01, 0.005, -0.004]], [[3.0, -2.0, 1.5]], [0.2], box=UNIT)
    vel = fields.TrigonometricMap([[0.004, -0.003, 0.002]], [[2.0, 1.0, -1.5]], [0.5], with_identity=False)
    return s.with_placement(pert).with_state(vel=vel.value(s.ref))


def test_equilibrium_is_stationary():
    s, k = small_lattice()
    out = step(step(s, k, BodyForce.zero(), 0.1), k, BodyForce.zero(), 0.1)
    assert np.array_equal(out.pos, s.ref) and not out.vel.any()


def test_two_body_first_step():
    s, k = two_body()
    dt = 0.01
    out = step(s, k, BodyForce.zero(), dt)
    assert out.pos[0, 0] == pytest.approx(0.5 * dt**2 * 0.1, rel=1e-12)
    assert out.vel[0, 0] > 0 > out.vel[1, 0]
    assert np.array_equal(out.vel[0], -out.vel[1])
    assert not diagnostics(out, k).momentum.any()


def test_free_fall():
    s = ParticleSystem.from_points([[0, 0, 0], [5, 0, 0]], 1.0, 1.0, 1.0)
    g = np.array([0.0, 0.0, -9.81])
    dt = 0.125
    out = step(s, Kernel("micro-elastic", 1.0, 1.0), BodyForce.uniform(g), dt)
    assert np.array_equal(out.vel, np.tile(dt * g, (2, 1)))


def test_divergence_error_carries_step():
    s, k = two_body()
    bad = BodyForce(lambda X, t: np.full(np.shape(X), np.inf) if t > 0.25 else np.zeros(np.shape(X)))
    with pytest.raises(DivergenceError) as info:
        run(s, k, bad, 0.1, 10)
    assert info.value.step == 3


def test_stable_dt_scaling():
    box = ((0, 0, 0), (0.8, 0.8, 0.8))
    s, k = build_lattice(box, 0.1, 0.3, 1.0), Kernel("micro-elastic", 1.0, 0.3)
    dt = stable_dt(s, k)
    assert stable_dt(s, k.with_horizon(0.3, 2.0)) == pytest.approx(dt / math.sqrt(2), rel=1e-14)
    fine = build_lattice(box, 0.05, 0.15, 1.0)
    # fixed c: the bond stiffness sum scales as c delta^2, so dt grows as 1/h
    assert stable_dt(fine, k.with_horizon(0.15)) == pytest.approx(2 * dt, rel=1e-12)
    # fixed macroscopic stiffness (c ~ delta^-4): dt decreases in proportion to h
    assert stable_dt(fine, k.with_horizon(0.15, 16.0)) == pytest.approx(dt / 2, rel=1e-12)


def test_stable_dt_isolated():
    s = ParticleSystem.from_points([[0, 0, 0]], 1.0, 1.0, 1.0)
    with pytest.warns(StabilityWarning):
        assert stable_dt(s, Kernel()) == math.inf


def test_diagnostics():
    s, k = small_lattice()
    d = diagnostics(s, k)
    assert not d.momentum.any() and d.kinetic == 0.0 and d.potential == 0.0
    s2, k2 = two_body()
    assert diagnostics(s2, k2).potential == pytest.approx(0.005, rel=1e-12)


def test_diagnostics_relabel_invariant(rng):
    s, k = small_lattice()
    s = wave_state(s)
    perm = rng.permutation(s.n)
    a, b = diagnostics(s, k), diagnostics(s.permuted(perm), k)
    assert np.allclose(a.momentum, b.momentum, rtol=1e-13, atol=1e-18)
    assert a.kinetic == pytest.approx(b.kinetic, rel=1e-13)
    assert a.potential == pytest.approx(b.potential, rel=1e-13)


def test_run_trace_and_conservation():
    s, k = small_lattice()
    s = wave_state(s)
    dt = stable_dt(s, k)
    _, trace = run(s, k, BodyForce.zero(), dt, 200)
    assert len(trace) == 201
    steps = trace.column("step")
    assert np.all(np.diff(steps) > 0)
    E = trace.column("total")
    assert np.all(np.isfinite(E))
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-3
    scale = s.mass.sum() * np.abs(s.vel).max()
    assert np.abs(trace.momentum - trace.momentum[0]).max() < 1e-12 * scale


def test_run_deterministic_across_threads():
    s, k = small_lattice()
    s = wave_state(s)
    a = run(s, k, BodyForce.zero(), 0.05, 20, threads=1)
    b = run(s, k, BodyForce.zero(), 0.05, 20, threads=4)
    assert a[1].records == b[1].records
    assert np.array_equal(a[0].pos, b[0].pos) and np.array_equal(a[0].vel, b[0].vel)


def test_local_limit_is_stress_divergence():
    pf = make_trig()
    k = Kernel("micro-elastic", 1.0, 0.3, influence="linear")
    g = np.arange(-3, 4)
    r = 0.1 * np.stack([c.ravel() for c in np.meshgrid(g, g, g, indexing="ij")], axis=-1)
    r = r[(np.linalg.norm(r, axis=1) > 0) & (np.linalg.norm(r, axis=1) <= 0.3 + 1e-12)]
    w = np.full(len(r), 1e-3)
    X = np.array([0.1, 0.2, -0.1])
    h = 1e-5
    div = np.zeros(3)
    for b in range(3):
        e = np.zeros(3)
        e[b] = h
        Fp = fields.eval_derivatives(pf, X + e, 1)[1]
        Fm = fields.eval_derivatives(pf, X - e, 1)[1]
        div += (second_moment_stress(k, Fp, r, w)[:, b] - second_moment_stress(k, Fm, r, w)[:, b]) / (2 * h)
    f = local_limit_force(k, pf, X, r, w)
    assert np.allclose(f, div, rtol=1e-6, atol=1e-9 * np.abs(f).max())


def test_convergence_affine_is_zero():
    pf = fields.affine([[1.05, 0.02, 0.0], [0.01, 0.98, 0.03], [0.0, -0.02, 1.01]])
    rows = horizon_convergence_study(pf, Kernel(), [0.1, 0.05, 0.025])
    assert max(r.max_error for r in rows) < 1e-14


def test_convergence_shear_decreases():
    pf = fields.quadratic_shear(0.4)
    rows = horizon_convergence_study(pf, Kernel(), [0.1, 0.05, 0.025], offsets=[[0, 0, 0]])
    errs = [r.max_error for r in rows]
    assert errs[0] > errs[1] > errs[2] > 0
    # force density itself is a nonzero constant along the sheared direction
    s = build_lattice(((-0.35, -0.35, -0.35), (0.35, 0.35, 0.35)), 0.1, 0.3, 1.0).with_placement(pf)
    i = int(np.argmin(np.sum(s.ref**2, axis=1)))
    assert abs(internal_force_density(s, Kernel("micro-elastic", 1.0, 0.3), i)[0]) > 0


def test_convergence_trig_order():
    rows = horizon_convergence_study(make_trig(), Kernel(), [0.1, 0.05, 0.025])
    assert rows[0].max_error > rows[1].max_error > rows[2].max_error
    assert rows[-1].est_order >= 1.5


def test_convergence_argument_errors():
    with pytest.raises(InsufficientDataError):
        horizon_convergence_study(make_trig(), Kernel(), [0.1, 0.05])
    with pytest.raises(SkinEffectError):
        horizon_convergence_study(make_trig(), Kernel(), [0.1, 0.05, 0.025], center=[0.9, 0.0, 0.0])
