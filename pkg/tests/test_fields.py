import numpy as np
import pytest

from gradpd import fields
from gradpd.errors import DegenerateDeformationError, DomainError
from gradpd.fields import (
    Box,
    deformation_state,
    eval_derivatives,
    green_jet,
    rho2_partial_fd,
    rho_squared,
)
from gradpd.identities import l_direct
from gradpd.multiindex import MultiIndex


def test_identity_gradient():
    d = eval_derivatives(fields.identity(), [0.3, -0.2, 0.5], 1)
    assert np.array_equal(d[1], np.eye(3))


def test_affine_derivatives():
    pf = fields.affine(np.diag([2.0, 1.0, 1.0]))
    d = eval_derivatives(pf, [0.3, 0.1, 0.5], 3)
    assert np.array_equal(d[1], np.diag([2.0, 1.0, 1.0]))
    assert not d[2].any() and not d[3].any()


def test_quadratic_shear_second_derivative(shear):
    d = eval_derivatives(shear, [0.0, 1.0, 0.0], 3)
    G = d[2]
    assert G[0, 1, 1] == pytest.approx(0.4)
    G2 = G.copy()
    G2[0, 1, 1] = 0.0
    assert not G2.any()
    assert not d[3].any()


def test_derivative_arrays_symmetric(trig):
    d = eval_derivatives(trig, [0.1, 0.2, 0.3], 4)
    assert np.allclose(d[2], np.swapaxes(d[2], 1, 2))
    assert np.allclose(d[3], np.transpose(d[3], (0, 2, 3, 1)))
    assert np.allclose(d[4], np.transpose(d[4], (0, 4, 2, 3, 1)))


def test_trig_derivatives_match_finite_difference(trig):
    X = np.array([0.1, -0.4, 0.25])
    for k in range(3):
        d = eval_derivatives(trig, X, k + 1)
        h = 1e-5
        for a in range(3):
            e = np.zeros(3)
            e[a] = h
            fd = (eval_derivatives(trig, X + e, k)[k] - eval_derivatives(trig, X - e, k)[k]) / (2 * h)
            assert np.allclose(fd, d[k + 1][..., a], atol=1e-9)


def test_outside_domain_raises(trig):
    with pytest.raises(DomainError):
        eval_derivatives(trig, [1.5, 0.0, 0.0], 1)
    with pytest.raises(ValueError):
        eval_derivatives(trig, [0.0, 0.0, 0.0], -1)


def test_degenerate_field_rejected():
    with pytest.raises(DegenerateDeformationError):
        fields.affine(np.diag([1.0, -1.0, 1.0]))
    # shear with |gamma b| large still has det F = 1, so it is valid
    fields.quadratic_shear(5.0)


def test_state_identity_and_stretch():
    s = deformation_state(fields.identity(), [0.0, 0.0, 0.0])
    assert np.array_equal(s.C, np.eye(3)) and not s.gradC.any() and s.H == 1.0
    s = deformation_state(fields.affine(np.diag([2.0, 1.0, 1.0])), [0.1, 0.1, 0.1])
    assert np.allclose(s.t, [4, 1, 1, 0, 0, 0]) and s.H == pytest.approx(2.0)


def test_state_shear(shear):
    s = deformation_state(shear, [0.0, 1.0, 0.0])
    assert s.C[0, 1] == pytest.approx(0.4) and s.C[1, 0] == pytest.approx(0.4)
    assert s.gradC[1, 1, 1] == pytest.approx(2 * 0.4**2 * 1.0)


def test_state_invariants(all_fields, rng):
    for pf in all_fields:
        for X in pf.box.sample(rng, 10, 0.0):
            s = deformation_state(pf, X)
            assert np.allclose(s.C, s.F.T @ s.F, rtol=0, atol=8 * np.finfo(float).eps * np.abs(s.C).max())
            assert np.array_equal(s.C, s.C.T)
            assert np.all(np.linalg.eigvalsh(s.C) > 0)
            assert np.array_equal(s.gradC, np.swapaxes(s.gradC, 0, 1))
            assert np.allclose(s.F @ s.Finv, np.eye(3), atol=1e-14)
            assert s.H > 0


def test_grad2c_matches_jet(trig):
    X = [0.2, 0.1, -0.3]
    s = deformation_state(trig, X)
    jet = green_jet(trig, X, 2)
    assert np.allclose(jet.derivative_tensor(1), s.gradC, atol=1e-14)
    assert np.allclose(jet.derivative_tensor(2), s.grad2C, atol=1e-14)


def test_rho_squared_examples():
    pf = fields.identity(Box((-3, -3, -3), (3, 3, 3)))
    assert rho_squared(pf, [0, 0, 0], [1, 2, 2]) == 9.0
    assert rho_squared(fields.affine(np.diag([2.0, 1, 1])), [0, 0, 0], [1, 0, 0]) == 4.0


def test_rho_squared_symmetric_and_zero(trig, rng):
    for X, Y in zip(trig.box.sample(rng, 20), trig.box.sample(rng, 20)):
        assert rho_squared(trig, X, Y) == rho_squared(trig, Y, X)
        assert rho_squared(trig, X, X) == 0.0


def test_fd_first_order_vanishes(all_fields, rng):
    h = 1e-3
    for pf in all_fields:
        for X in pf.box.sample(rng, 5, 0.1):
            for m in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
                assert abs(rho2_partial_fd(pf, X, X, m, h)) < 10 * h**2


def test_fd_identity_second():
    v = rho2_partial_fd(fields.identity(), [0.1, 0.1, 0.1], [0.1, 0.1, 0.1], (2, 0, 0), 1e-3)
    assert v == pytest.approx(2.0, abs=1e-8)


def test_fd_shear_mixed(shear):
    X = [0.0, 1.0, 0.0]
    with pytest.raises(DomainError):
        # the b-axis stencil at b = 1 leaves [-1, 1]^3
        rho2_partial_fd(shear, X, X, (1, 1, 0), 1e-3)
    pf = fields.quadratic_shear(0.4, Box((-2, -2, -2), (2, 2, 2)))
    v = rho2_partial_fd(pf, X, X, MultiIndex(1, 1, 0), 1e-3)
    assert abs(v - 0.8) < 1e-5


def test_fd_polynomial_high_orders_vanish(rng):
    aff = fields.affine([[1.2, 0.1, 0.0], [0.05, 0.9, 0.1], [0.0, -0.1, 1.1]])
    sh = fields.quadratic_shear(0.4)
    X = np.array([0.1, 0.2, -0.1])
    Y = np.array([0.2, -0.1, 0.0])
    for m in [(4, 0, 0), (2, 1, 1), (1, 3, 0)]:
        assert abs(rho2_partial_fd(aff, X, Y, m, 1e-2)) < 1e-6
    for m in [(0, 6, 0), (2, 4, 0), (1, 1, 4)]:
        assert abs(rho2_partial_fd(sh, X, Y, m, 5e-2)) < 1e-5


def test_fd_deterministic_and_accurate(trig):
    X = np.array([0.2, -0.3, 0.4])
    exact = l_direct(trig, X, 3)
    a = rho2_partial_fd(trig, X, X, (1, 2, 0), 1e-2)
    assert a == rho2_partial_fd(trig, X, X, (1, 2, 0), 1e-2)
    assert abs(a - exact[0, 1, 1]) < 1e-7


def test_fd_stencil_outside_domain(trig):
    with pytest.raises(DomainError):
        rho2_partial_fd(trig, [0.99, 0, 0], [0.99, 0, 0], (2, 0, 0), 0.1)
