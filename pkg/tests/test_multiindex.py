import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradpd.multiindex import MultiIndex, SymTensor, max_asymmetry, monomials, multi_indices, multinomial


@pytest.mark.parametrize("n", range(7))
def test_enumeration_count_and_order(n):
    ms = multi_indices(n)
    assert len(ms) == (n + 1) * (n + 2) // 2
    assert len(set(ms)) == len(ms)
    assert all(m.order == n for m in ms)
    # descending lexicographic: (n,0,0) first, (0,0,n) last
    assert [m.exponents for m in ms] == sorted((m.exponents for m in ms), reverse=True)
    assert ms[0].exponents == (n, 0, 0)


def test_multiindex_string_and_indices():
    m = MultiIndex(2, 0, 1)
    assert str(m) == "201"
    assert m.index_tuple() == (0, 0, 2)
    assert MultiIndex.from_indices((2, 0, 0)) == m
    with pytest.raises(ValueError):
        MultiIndex(-1, 0, 0)


def test_multinomial_sums_to_power_of_three():
    for n in range(6):
        assert sum(multinomial(m) for m in multi_indices(n)) == 3**n


def test_monomials():
    r = np.array([[2.0, 3.0, 5.0]])
    vals = monomials(r, 2)[0]
    expect = [2.0**m.n1 * 3.0**m.n2 * 5.0**m.n3 for m in multi_indices(2)]
    assert np.allclose(vals, expect)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_full_reconstruction_is_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    t = SymTensor(n, rng.standard_normal(len(multi_indices(n))))
    full = t.to_full()
    assert max_asymmetry(full) == 0.0
    assert np.array_equal(SymTensor.from_full(full).components, t.components)
    for idx in itertools.islice(itertools.product(range(3), repeat=n), 20):
        assert t.at(*idx) == full[idx]


def test_from_full_rejects_asymmetric_when_checked():
    a = np.zeros((3, 3))
    a[0, 1] = 1.0
    with pytest.raises(ValueError):
        SymTensor.from_full(a, check=True)


def test_contract_matches_dense_sum(rng):
    for n in (2, 3, 4):
        k = len(multi_indices(n))
        a, b = SymTensor(n, rng.standard_normal(k)), SymTensor(n, rng.standard_normal(k))
        assert math.isclose(a.contract(b), float(np.sum(a.to_full() * b.to_full())), rel_tol=1e-13)


def test_components_read_only():
    t = SymTensor(2, np.ones(6))
    with pytest.raises(ValueError):
        t.components[0] = 2.0


def test_arithmetic():
    a = SymTensor(2, np.arange(6.0))
    assert np.array_equal((a + a).components, (a * 2).components)
    assert np.array_equal((a - a).components, np.zeros(6))
    assert a[(1, 1, 0)] == a.components[1]
