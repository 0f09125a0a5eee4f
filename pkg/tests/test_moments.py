import warnings

import numpy as np
import pytest

from gradpd import fields
from gradpd.errors import InsufficientDataError, TruncatedSupportWarning, UnsupportedOrderError
from gradpd.interaction import Kernel, VirtualField
from gradpd.lattice import build_lattice
from gradpd.moments import (
    expansion_residual,
    full_work_density,
    gradient_expansion_work,
    moment_tensors,
    quadrature_neighborhood,
)
from gradpd.multiindex import multi_indices
from gradpd.simulate import second_moment_stress

from conftest import make_trig

UNIFORM = Kernel("uniform", 1.0, 1.0, support="box")
X0 = np.array([0.2, -0.3, 0.4])


def _trig_virtual():
    shape = fields.TrigonometricMap([[0.5, -0.2, 0.3]], [[0.9, -1.2, 0.6]], [0.4], with_identity=False)
    return VirtualField(shape, 1.0)


def test_uniform_cube_second_moment_converges():
    errs = []
    for res in (16, 32, 64):
        ms = moment_tensors(UNIFORM, [0, 0, 0], fields.identity(), 2, res)
        errs.append(abs(ms[2][(2, 0, 0)] - 8 / 3))
        assert abs(ms[2][(1, 1, 0)]) < 1e-14
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-3


def test_uniform_cube_odd_moments_vanish():
    ms = moment_tensors(UNIFORM, [0, 0, 0], None, 5, 24)
    for n in (3, 5):
        assert np.abs(ms[n].components).max() < 1e-14


def test_moment_symmetry_by_construction():
    ms = moment_tensors(Kernel("micro-elastic", 1.0, 0.3), X0, make_trig(), 4, 12)
    for n in (2, 3, 4):
        full = ms[n].to_full()
        assert np.array_equal(full, np.swapaxes(full, 0, n - 1))


def test_truncated_support_warning():
    with pytest.warns(TruncatedSupportWarning):
        ms = moment_tensors(Kernel("micro-elastic", 1.0, 0.3), [0.9, 0, 0], make_trig(), 2, 8)
    assert ms.warnings
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not moment_tensors(Kernel("micro-elastic", 1.0, 0.3), X0, make_trig(), 2, 8).warnings


@pytest.mark.parametrize("nmax", [1, 7])
def test_nmax_range(nmax):
    with pytest.raises(UnsupportedOrderError):
        moment_tensors(UNIFORM, [0, 0, 0], None, nmax, 4)


def test_work_hand_oracle():
    eps = 1e-3
    pf = fields.identity()
    vf = VirtualField(fields.AffineMap(np.diag([1.0, 0, 0])), eps)
    ms = moment_tensors(UNIFORM, [0, 0, 0], pf, 4, 32)
    w = gradient_expansion_work(pf, vf, ms, 2)
    assert w == pytest.approx(2 * eps * ms[2][(2, 0, 0)], rel=1e-10)
    assert w == pytest.approx(2 * eps * 8 / 3, rel=1e-3)
    # higher orders add nothing for an affine placement
    assert gradient_expansion_work(pf, vf, ms, 4) == pytest.approx(w, rel=1e-10)


def test_translation_gives_zero(trig):
    ms = moment_tensors(Kernel("micro-elastic", 1.0, 0.3), X0, trig, 4, 12)
    w = gradient_expansion_work(trig, VirtualField.translation([1.0, 2.0, -1.0]), ms, 4)
    assert abs(w) < 1e-12 * abs(ms[2].components).max()


def test_affine_expansion_exact():
    # delta(rho^2) is exactly quadratic in r when both chi and dchi are affine
    pf = fields.affine([[1.1, 0.05, 0.0], [0.0, 0.95, 0.1], [0.02, 0.0, 1.05]])
    vf = VirtualField(fields.AffineMap([[0.3, -0.1, 0.2], [0.0, 0.4, -0.2], [0.1, 0.1, -0.3]]), 1.0)
    rows = expansion_residual(pf, vf, Kernel("micro-elastic", 1.0, 0.4), X0, 2, [0.4, 0.2, 0.1], 16)
    for r in rows:
        assert r.residual <= 1e-12 * abs(r.full_work)


def test_expansion_orders_and_nesting(trig):
    k = Kernel("micro-elastic", 1.0, 0.4)
    res = {n: expansion_residual(trig, _trig_virtual(), k, X0, n, [0.4, 0.2, 0.1, 0.05], 16) for n in (2, 3, 4)}
    assert all(r.est_order >= 1.9 for r in res[2][1:])
    for r2, r3 in zip(res[2], res[3]):
        assert r3.residual <= r2.residual
    # small horizon, Nmax = 4: expansion reproduces the full sum closely
    fine = res[4][-1]
    assert fine.residual <= 1e-5 * abs(fine.full_work)


def test_expansion_argument_checks(trig):
    k = Kernel("micro-elastic", 1.0, 0.4)
    with pytest.raises(InsufficientDataError):
        expansion_residual(trig, _trig_virtual(), k, X0, 2, [0.2], 8)
    with pytest.raises(ValueError):
        expansion_residual(trig, _trig_virtual(), k, X0, 2, [0.1, 0.2], 8)


def test_full_work_matches_direct_sum(trig):
    k = Kernel("micro-elastic", 1.0, 0.3)
    nb = quadrature_neighborhood(k, trig, X0, 10)
    vf = _trig_virtual()
    direct = 0.0
    for r, w in zip(nb.offsets, nb.weights):
        y = trig.value(X0 + r) - trig.value(X0)
        rho = np.linalg.norm(y)
        dv = vf.value(X0 + r) - vf.value(X0)
        direct += w * k.lam(rho, np.linalg.norm(r)) * 2 * (y @ dv)
    assert full_work_density(trig, vf, nb) == pytest.approx(direct, rel=1e-12)


def test_lattice_moments_and_stress_tie():
    """Nmax = 2 work equals P : grad(dchi) for a homogeneous deformation."""
    F = np.array([[1.05, 0.02, 0.0], [0.01, 0.98, 0.03], [0.0, -0.02, 1.01]])
    box = fields.Box((0, 0, 0), (1.1, 1.1, 1.1))
    pf = fields.affine(F, box)
    k = Kernel("micro-elastic", 1.0, 0.3)
    s = build_lattice(box, 0.1, 0.3, 1.0).with_placement(pf)
    i = int(np.argmin(np.sum((s.ref - 0.55) ** 2, axis=1)))
    ms = moment_tensors(k, s.ref[i], s, 3)
    assert np.abs(ms[3].components).max() < 1e-14 * np.abs(ms[2].components).max()
    dF = np.array([[0.3, -0.1, 0.2], [0.0, 0.4, -0.2], [0.1, 0.1, -0.3]])
    vf = VirtualField(fields.AffineMap(dF), 1.0)
    j = s.neighbors(i)
    P = second_moment_stress(k, F, s.ref[j] - s.ref[i], s.mu * s.volume[j])
    w = gradient_expansion_work(pf, vf, ms, 2)
    assert w == pytest.approx(float(np.sum(P * dF)), rel=1e-9)


def test_moment_components_are_weighted_monomials(trig):
    k = Kernel("micro-elastic", 1.0, 0.3)
    nb = quadrature_neighborhood(k, trig, X0, 6)
    ms = moment_tensors(k, X0, trig, 3, 6)
    for m in multi_indices(3):
        mono = nb.offsets[:, 0] ** m.n1 * nb.offsets[:, 1] ** m.n2 * nb.offsets[:, 2] ** m.n3
        assert ms[3][m] == pytest.approx(float(np.sum(nb.weights * nb.lam * mono)), rel=1e-12, abs=1e-18)
