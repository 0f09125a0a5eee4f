"""Differential identities relating placement derivatives to C and its gradients.

Conventions: ``F[i, a] = d chi^i / dX^a``, ``gradC[a, b, g] = dC_ab / dX^g``,
second placement derivatives ``G[i, a, b]``. The six "trinomials" t1..t6 are
(C11, C22, C33, C12, C13, C23) and the reference axes a, b, c are 0, 1, 2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDeformationError, UnsupportedOrderError
from .fields import (
    DeformationState,
    PlacementField,
    eval_derivatives,
    green_jet,
    rho2_partial_fd,
    state_from_derivatives,
)
from .jets import Jet, einsum, inverse_matrix
from .multiindex import MultiIndex, SymTensor, multi_indices

__all__ = [
    "IdentityReport",
    "TrinomialFamily",
    "d_tensor",
    "grad_f_from_c",
    "third_rho2_at_coincidence",
    "m_recursion",
    "l_recursion",
    "m_direct",
    "l_direct",
    "l_recursion_full",
    "enumerate_trinomials",
    "trinomial_identity_suite",
    "literal_second_derivative_rows",
    "compare",
    "MAX_RECURSION_ORDER",
    "DEFAULT_TOLERANCES",
    "tolerance_for",
    "report_passed",
    "verification_suite",
]

MAX_RECURSION_ORDER = 5


@dataclass(frozen=True)
class IdentityReport:
    name: str
    point: tuple
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float

    def passed(self, tol: float) -> bool:
        return self.rel_residual < tol


def compare(name: str, point, lhs, rhs) -> IdentityReport:
    """Report the worst component of ``lhs - rhs`` (scalars or arrays)."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    diff = np.abs(lhs - rhs)
    k = int(np.argmax(diff)) if diff.ndim else 0
    l = float(lhs.ravel()[k]) if lhs.ndim else float(lhs)
    r = float(rhs.ravel()[k]) if rhs.ndim else float(rhs)
    a = abs(l - r)
    scale = max(abs(l), abs(r), 1.0)
    return IdentityReport(name, tuple(float(v) for v in point), l, r, a, a / scale)


# -- second-order representation ------------------------------------------


def d_tensor(state: DeformationState, grad2chi: np.ndarray) -> np.ndarray:
    """D[a, b, e] = (d^2 chi^i / dX^a dX^b) F_{i e}."""
    return np.einsum("iab,ie->abe", grad2chi, state.F)


def grad_f_from_c(state: DeformationState) -> np.ndarray:
    """Second placement derivatives G[j, a, g] rebuilt from C and grad C only."""
    if not state.H > 0.0:
        raise DegenerateDeformationError("det F <= 0")
    g = state.gradC
    # bracket[a, b, g] = dC_ab/dX^g + dC_gb/dX^a - dC_ga/dX^b
    bracket = g + np.einsum("gba->abg", g) - np.einsum("gab->abg", g)
    return 0.5 * np.einsum("bj,abg->jag", state.Finv, bracket)


def third_rho2_at_coincidence(state: DeformationState) -> SymTensor:
    """d^3 rho^2 / dXbar^a dXbar^b dXbar^g at Xbar = X."""
    g = state.gradC
    # dC_ag/dX^b + dC_bg/dX^a + dC_ba/dX^g, indexed [a, b, g]
    full = np.einsum("agb->abg", g) + np.einsum("bga->abg", g) + np.einsum("bag->abg", g)
    return SymTensor.from_full(full)


def literal_second_derivative_rows(state: DeformationState) -> dict:
    """Three scalar rows of the classical 2H d^2x/da^2 system, transcribed literally.

    Keys name the left side; values are ``(lhs_coefficient_target, rhs)``
    where the target is the (component, axis, axis) of d^2 chi and the
    right side equals ``2 H`` times that derivative. ``l, m, n`` rows are
    the cofactor matrix H * F^{-T}.
    """
    H = state.H
    lmn = H * state.Finv.T  # lmn[j] = (l_j, m_j, n_j)
    dt = state.dt  # dt[k, axis]
    a, b, c = 0, 1, 2
    t1, t2, t3, t4, t5, t6 = (dt[k] for k in range(6))
    l1, m1, n1 = lmn[0]
    l2, m2, n2 = lmn[1]
    rows = {
        "2H_xaa": ((0, a, a), l1 * t1[a] + m1 * (2 * t4[a] - t1[b]) + n1 * (2 * t5[a] - t1[c])),
        "2H_yab": ((1, a, b), l2 * t1[b] + m2 * t2[a] + n2 * (t5[b] + t6[a] - t4[c])),
        "2H_xbc": ((0, b, c), l1 * (t4[c] + t5[b] - t6[a]) + m1 * t2[c] + n1 * t3[b]),
    }
    return rows


# -- trinomial families -----------------------------------------------------

_FAMILY_COUNTS = {(1, 2): 18, (2, 2): 21, (1, 3): 30, (2, 3): 60, (3, 3): 55}


@dataclass(frozen=True)
class TrinomialFamily:
    """All sums chi_p . chi_q over one p-th and one q-th derivative slot."""

    p: int
    q: int
    members: tuple  # tuple of (MultiIndex, MultiIndex)

    def __len__(self):
        return len(self.members)

    @property
    def expected_count(self) -> int:
        return _FAMILY_COUNTS[(self.p, self.q)]

    def evaluate(self, derivs) -> np.ndarray:
        """Values sum_i d^u chi^i d^w chi^i for each member, from exact derivatives."""
        out = []
        for u, w in self.members:
            du = derivs[u.order][(slice(None),) + u.index_tuple()]
            dw = derivs[w.order][(slice(None),) + w.index_tuple()]
            out.append(float(du @ dw))
        return np.array(out)


def enumerate_trinomials(p: int, q: int) -> TrinomialFamily:
    if (p, q) not in _FAMILY_COUNTS:
        raise UnsupportedOrderError(f"unsupported trinomial family ({p}, {q})")
    if p == q:
        members = tuple(itertools.combinations_with_replacement(multi_indices(p), 2))
    else:
        members = tuple(itertools.product(multi_indices(p), multi_indices(q)))
    return TrinomialFamily(p, q, members)


# Table of first x second derivative trinomials in the classical numbering:
# (first-derivative axis, second-derivative axes).
_FIRST_SECOND_PAIRS = (
    (0, (0, 0)), (0, (0, 1)), (0, (0, 2)),
    (1, (0, 1)), (1, (1, 1)), (1, (1, 2)),
    (2, (0, 2)), (2, (1, 2)), (2, (2, 2)),
    (1, (0, 0)), (0, (1, 1)), (0, (1, 2)),
    (2, (0, 0)), (1, (0, 2)), (0, (2, 2)),
    (2, (0, 1)), (2, (1, 1)), (1, (2, 2)),
)


def _first_second_rhs(dt: np.ndarray) -> list:
    a, b, c = 0, 1, 2
    t1, t2, t3, t4, t5, t6 = (dt[k] for k in range(6))
    h = 0.5
    return [
        h * t1[a], h * t1[b], h * t1[c],
        h * t2[a], h * t2[b], h * t2[c],
        h * t3[a], h * t3[b], h * t3[c],
        t4[a] - h * t1[b],
        t4[b] - h * t2[a],
        h * t4[c] + h * t5[b] - h * t6[a],
        t5[a] - h * t1[c],
        h * t4[c] - h * t5[b] + h * t6[a],
        t5[c] - h * t3[a],
        -h * t4[c] + h * t5[b] + h * t6[a],
        t6[b] - h * t2[c],
        t6[c] - h * t3[b],
    ]


def _fraction(t: np.ndarray, dt: np.ndarray):
    """Numerator and denominator of |d^2 chi / da^2|^2 in terms of t and dt."""
    a, b, c = 0, 1, 2
    t1, t2, t3, t4, t5, t6 = t
    w1 = dt[0][a]
    w2 = 2 * dt[3][a] - dt[0][b]
    w3 = 2 * dt[4][a] - dt[0][c]
    num = (
        (t2 * t3 - t6**2) * w1**2
        + (t1 * t3 - t5**2) * w2**2
        + (t1 * t2 - t4**2) * w3**2
        + 2 * (t5 * t6 - t3 * t4) * w1 * w2
        + 2 * (t4 * t6 - t2 * t5) * w1 * w3
        + 2 * (t4 * t5 - t1 * t6) * w2 * w3
    )
    den = 4 * (t1 * t2 * t3 + 2 * t4 * t5 * t6 - t1 * t6**2 - t2 * t5**2 - t3 * t4**2)
    return num, den


def trinomial_identity_suite(pf: PlacementField, X) -> list[IdentityReport]:
    """The 18 first x second trinomial identities plus the squared-curvature fraction."""
    derivs = eval_derivatives(pf, X, 3)
    state = state_from_derivatives(derivs)
    detC = float(np.linalg.det(state.C))
    if detC < 1e-12:
        raise DegenerateDeformationError(f"det C = {detC:.3e}")
    F, G = derivs[1], derivs[2]
    rhs = _first_second_rhs(state.dt)
    reports = []
    for k, (ax, (p, q)) in enumerate(_FIRST_SECOND_PAIRS):
        lhs = float(F[:, ax] @ G[:, p, q])
        reports.append(compare(f"trinomial_{k + 1:02d}", X, lhs, rhs[k]))
    num, den = _fraction(state.t, state.dt)
    lhs = float(G[:, 0, 0] @ G[:, 0, 0])
    reports.append(compare("fraction_xaa_squared", X, lhs, num / den))
    reports.append(compare("fraction_denominator", X, den, 4.0 * detC))
    return reports


# -- recursion lemmas -------------------------------------------------------


def _check_order(n: int):
    if not 2 <= n <= MAX_RECURSION_ORDER:
        raise UnsupportedOrderError(
            f"recursion order {n} outside 2..{MAX_RECURSION_ORDER}"
        )


def _m2_jet(cjet: Jet) -> Jet:
    """M_{g a b} = 1/2 (dC_ag/dX^b + dC_bg/dX^a - dC_ba/dX^g) as a jet."""
    d = cjet.grad().coef  # d[a, b, g, coef] = dC_ab/dX^g
    order = cjet.order - 1
    t1 = np.einsum("agbz->gabz", d)
    t2 = np.einsum("bgaz->gabz", d)
    t3 = np.einsum("bagz->gabz", d)
    return Jet(0.5 * (t1 + t2 - t3), order)


_LETTERS = "abcdef"


def _m_jets(cjet: Jet, n: int) -> list[Jet]:
    """Jets of M_2 .. M_n built from the C jet alone.

    M_{g a1..ak w} = dM_{g a1..ak}/dX^w - (C^-1)^{be} M_{e g w} M_{b a1..ak}
    """
    cinv = inverse_matrix(cjet)
    m2 = _m2_jet(cjet)
    ms = [m2]
    for k in range(2, n):
        mk = ms[-1]
        al = _LETTERS[:k]
        tmp = einsum("uv,vgw->ugw", cinv, m2)
        prod = einsum(f"ugw,u{al}->g{al}w", tmp, mk)
        ms.append(mk.grad() - prod)
    return ms


def m_recursion(pf: PlacementField, X, n: int) -> np.ndarray:
    """F_{i g} d^n chi^i / dX^{a1}..dX^{an} from C, grad C, ..., grad^{n-1} C.

    Returns a dense array indexed [g, a1, ..., an].
    """
    _check_order(n)
    cjet = green_jet(pf, X, n - 1)
    if np.linalg.det(cjet.value) < 1e-300:
        raise DegenerateDeformationError("singular C")
    return _m_jets(cjet, n)[-1].value.copy()


def m_direct(pf: PlacementField, X, n: int) -> np.ndarray:
    """Direct contraction F_{i g} d^n chi^i from the field registry (oracle)."""
    d = eval_derivatives(pf, X, n)
    return np.tensordot(d[1], d[n], axes=([0], [0]))


def _l_jets(cjet: Jet, n: int) -> list[Jet]:
    """Jets of L_2 .. L_n where L_n equals d^n rho^2 at coincidence.

    L_2 = 2 C and L_{k+1} = dL_k/dX^w + 2 M_{w a1..ak}.
    """
    ls = [cjet * 2.0]
    if n == 2:
        return ls
    ms = _m_jets(cjet, n - 1)
    for k in range(2, n):
        mk = ms[k - 2]
        # move the free slot g of M_k to the last position
        moved = Jet(np.moveaxis(mk.coef, 0, k), mk.order)
        ls.append(ls[-1].grad() + moved * 2.0)
    return ls


def l_recursion(pf: PlacementField, X, n: int) -> SymTensor:
    """d^n rho^2 / dXbar^{a1}..dXbar^{an} at Xbar = X, from C, ..., grad^{n-2} C."""
    _check_order(n)
    cjet = green_jet(pf, X, n - 2)
    return SymTensor.from_full(_l_jets(cjet, n)[-1].value)


def l_recursion_full(pf: PlacementField, X, n: int) -> np.ndarray:
    """Dense (unsymmetrized) output of the L recursion, for symmetry checks."""
    _check_order(n)
    cjet = green_jet(pf, X, n - 2)
    return _l_jets(cjet, n)[-1].value.copy()


def l_direct(pf: PlacementField, X, n: int) -> np.ndarray:
    """Exact d^n rho^2 at coincidence by the Leibniz rule on chi (oracle).

    Sum over ordered splits of the n slots into two non-empty groups.
    """
    d = eval_derivatives(pf, X, n)
    out = np.zeros((3,) * n)
    for idx in itertools.product(range(3), repeat=n):
        acc = 0.0
        for mask in range(1, 2 ** n - 1):
            left = tuple(idx[s] for s in range(n) if mask >> s & 1)
            right = tuple(idx[s] for s in range(n) if not mask >> s & 1)
            acc += float(d[len(left)][(slice(None),) + left] @ d[len(right)][(slice(None),) + right])
        out[idx] = acc
    return out


# -- verification suite -----------------------------------------------------

# (tolerance, residual kind) by report-name prefix; FD comparisons are absolute
DEFAULT_TOLERANCES = {
    "flatness": (1e-10, "rel"),
    "row_": (1e-10, "rel"),
    "d_tensor": (1e-12, "rel"),
    "trinomial_": (1e-10, "rel"),
    "fraction_xaa_squared": (1e-10, "rel"),
    "fraction_denominator": (1e-12, "rel"),
    "third_rho2_fd": (1e-5, "abs"),
    "m_recursion": (1e-8, "rel"),
    "l_recursion_fd": (1e-5, "abs"),
    "l_recursion_exact": (1e-8, "rel"),
}


def tolerance_for(name: str, tolerances: dict | None = None) -> tuple[float, str]:
    table = DEFAULT_TOLERANCES if tolerances is None else {**DEFAULT_TOLERANCES, **tolerances}
    best = max((p for p in table if name.startswith(p)), key=len, default=None)
    if best is None:
        raise KeyError(f"no tolerance registered for {name!r}")
    return table[best]


def report_passed(report: IdentityReport, tolerances: dict | None = None) -> bool:
    tol, kind = tolerance_for(report.name, tolerances)
    value = report.rel_residual if kind == "rel" else report.abs_residual
    return bool(value < tol)


def _fd_tensor(pf, X, n, h):
    comps = [rho2_partial_fd(pf, X, X, m, h, richardson=True) for m in multi_indices(n)]
    return np.array(comps)


def verification_suite(pf: PlacementField, X, fd_step: float = 1e-2) -> list[IdentityReport]:
    """Every pointwise identity check at ``X``, in a fixed order."""
    X = np.asarray(X, dtype=float)
    derivs = eval_derivatives(pf, X, MAX_RECURSION_ORDER)
    state = state_from_derivatives(derivs)
    G = derivs[2]
    out = [compare("flatness", X, grad_f_from_c(state), G)]
    for name, (target, rhs) in literal_second_derivative_rows(state).items():
        out.append(compare(f"row_{name}", X, 2.0 * state.H * G[target], rhs))
    D = d_tensor(state, G)
    out.append(compare("d_tensor_symmetry", X, D, np.swapaxes(D, 0, 1)))
    g = state.gradC
    # D[a, b, e] = 1/2 (dC_ae/dX^b + dC_be/dX^a - dC_ab/dX^e)
    half = 0.5 * (np.einsum("aeb->abe", g) + np.einsum("bea->abe", g) - g)
    out.append(compare("d_tensor_decomposition", X, D, half))
    out.extend(trinomial_identity_suite(pf, X))
    out.append(
        compare("third_rho2_fd", X, third_rho2_at_coincidence(state).components, _fd_tensor(pf, X, 3, fd_step))
    )
    for n in range(2, MAX_RECURSION_ORDER + 1):
        out.append(compare(f"m_recursion_n{n}", X, m_recursion(pf, X, n), m_direct(pf, X, n)))
    for n in range(2, 5):
        out.append(
            compare(f"l_recursion_fd_n{n}", X, l_recursion(pf, X, n).components, _fd_tensor(pf, X, n, fd_step))
        )
    n = MAX_RECURSION_ORDER
    out.append(compare(f"l_recursion_exact_n{n}", X, l_recursion_full(pf, X, n), l_direct(pf, X, n)))
    return out
