import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wellbeing_dbn.core import (
    Bin,
    CpdTable,
    Factor,
    Variable,
    bin_midpoint,
    contract,
    discretize,
    factor_product,
    marginal,
    marginalize,
    normalize,
    reduce,
    rename,
)
from wellbeing_dbn.errors import DegenerateEvidenceError, DomainError, ModelError, UsageError

A, B, C = Variable("a", 2), Variable("b", 3), Variable("c", 2)


def test_variable_needs_two_states():
    with pytest.raises(ModelError):
        Variable("x", 1)
    assert Variable("x", 2, ("lo", "hi")).index_of("hi") == 1


@pytest.mark.parametrize("x, expected", [(0.0, 0), (1.0, 5), (0.18, 1), (1 / 6, 1), (0.999, 5)])
def test_discretize_examples(x, expected):
    assert discretize(x, 6).index == expected


@pytest.mark.parametrize("x, n", [(-0.01, 6), (1.01, 6), (0.5, 1), (math.nan, 6)])
def test_discretize_domain_errors(x, n):
    with pytest.raises(DomainError):
        discretize(x, n)


def test_bin_rejects_out_of_range_index():
    with pytest.raises(DomainError):
        Bin(6, 6)


@pytest.mark.parametrize("index, expected", [(0, 1 / 12), (5, 11 / 12), (2, 5 / 12)])
def test_bin_midpoint_examples(index, expected):
    assert bin_midpoint(Bin(index, 6)) == pytest.approx(expected, abs=1e-15)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(2, 12))
def test_discretize_monotone_and_midpoint_close(x, y, n):
    lo, hi = sorted((x, y))
    assert discretize(lo, n).index <= discretize(hi, n).index
    assert abs(bin_midpoint(discretize(x, n)) - x) <= 1 / (2 * n) + 1e-12


def test_factor_product_identity_and_zero():
    f = Factor([A, B], np.arange(6, dtype=float))
    assert np.array_equal(factor_product(f, Factor.ones([A, B])).values, f.values)
    g = Factor([B, C], np.ones(6))
    z = factor_product(Factor.scalar(0.0), g)
    assert z.names == ("b", "c") and not z.values.any()


def test_factor_product_matches_nested_loops():
    rng = np.random.default_rng(3)
    x, y, z = Variable("x", 2), Variable("y", 2), Variable("z", 2)
    f = Factor([x, y], rng.random((2, 2)))
    g = Factor([y, z], rng.random((2, 2)))
    prod = factor_product(f, g)
    for i, j, k in itertools.product(range(2), repeat=3):
        want = f.values[i, j] * g.values[j, k]
        assert prod.value({"x": i, "y": j, "z": k}) == pytest.approx(want, abs=1e-15)


def test_factor_product_cardinality_mismatch():
    with pytest.raises(ModelError):
        factor_product(Factor.ones([Variable("a", 2)]), Factor.ones([Variable("a", 3)]))


def test_factor_stores_canonical_order():
    f = Factor([B, A], np.arange(6, dtype=float).reshape(3, 2))
    assert f.names == ("a", "b")
    assert f.value({"a": 1, "b": 2}) == 5.0


def test_factor_rejects_negative_or_wrong_size():
    with pytest.raises(ModelError):
        Factor([A], [0.5, -0.1])
    with pytest.raises(ModelError):
        Factor([A], [1.0, 2.0, 3.0])


def test_marginalize_examples():
    m = marginalize(Factor.ones([A, C]), C)
    assert m.names == ("a",) and np.array_equal(m.values, [2.0, 2.0])
    joint = normalize(Factor([A, B, C], np.random.default_rng(0).random(12)))
    total = joint
    for v in (A, B, C):
        total = marginalize(total, v)
    assert total.names == () and abs(total.total() - 1.0) <= 1e-9
    with pytest.raises(UsageError):
        marginalize(Factor.ones([A]), B)


def test_marginalize_matches_nested_loops():
    f = Factor([A, B, C], np.random.default_rng(7).random((2, 3, 2)))
    m = marginalize(f, "b")
    for i, k in itertools.product(range(2), range(2)):
        want = sum(f.values[i, j, k] for j in range(3))
        assert m.value({"a": i, "c": k}) == pytest.approx(want, abs=1e-15)


def test_normalize_examples():
    assert np.array_equal(normalize(Factor([A], [2.0, 2.0])).values, [0.5, 0.5])
    p = Factor([B], [0.2, 0.3, 0.5])
    assert np.allclose(normalize(p).values, p.values, atol=1e-12, rtol=0)
    with pytest.raises(DegenerateEvidenceError):
        normalize(Factor([A], [0.0, 0.0]))


def test_reduce_and_rename():
    f = Factor([A, B], np.arange(6, dtype=float))
    r = reduce(f, {"b": 2, "zz": 0})
    assert r.names == ("a",) and list(r.values) == [2.0, 5.0]
    assert reduce(f, {"zz": 1}) is f
    g = rename(f, {"a": "q"})
    assert g.names == ("b", "q") and g.value({"q": 1, "b": 0}) == f.value({"a": 1, "b": 0})


def test_cpd_table_column_sums():
    CpdTable.from_array(B, [A], [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]])
    with pytest.raises(ModelError):
        CpdTable.from_array(B, [A], [[0.2, 0.3, 0.5], [0.9, 0.0, 0.0]])
    cpd = CpdTable.uniform(B, [A, C])
    assert np.allclose(cpd.as_array(), 1 / 3)
    assert cpd.prob(1, {"a": 0, "c": 1}) == pytest.approx(1 / 3)


# -- properties -------------------------------------------------------------

VARS = [Variable(n, k) for n, k in (("p", 2), ("q", 3), ("r", 2), ("s", 4))]


@st.composite
def factors(draw, min_vars=0):
    chosen = draw(st.lists(st.sampled_from(VARS), min_size=min_vars, max_size=3, unique_by=lambda v: v.name))
    n = math.prod(v.cardinality for v in chosen)
    vals = draw(st.lists(st.one_of(st.just(0.0), st.floats(1e-3, 10)), min_size=n, max_size=n))
    return Factor(chosen, vals)


@settings(max_examples=60, deadline=None)
@given(factors(), factors(), factors())
def test_product_commutative_and_associative(f, g, h):
    assert factor_product(f, g).names == factor_product(g, f).names
    assert np.array_equal(factor_product(f, g).values, factor_product(g, f).values)
    left = factor_product(factor_product(f, g), h)
    right = factor_product(f, factor_product(g, h))
    assert left.names == right.names
    assert np.allclose(left.values, right.values, rtol=1e-12, atol=0)


@settings(max_examples=60, deadline=None)
@given(factors(), factors(min_vars=1), st.data())
def test_marginalize_distributes_over_product(f, g, data):
    v = data.draw(st.sampled_from([n for n in g.names if n not in f.names] or ["__none__"]))
    if v == "__none__":
        return
    lhs = marginalize(factor_product(f, g), v)
    rhs = factor_product(f, marginalize(g, v))
    assert lhs.names == rhs.names
    assert np.allclose(lhs.values, rhs.values, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(factors(min_vars=1))
def test_normalize_sums_to_one(f):
    if f.total() == 0:
        with pytest.raises(DegenerateEvidenceError):
            normalize(f)
        return
    assert abs(normalize(f).total() - 1.0) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(factors(min_vars=2))
def test_contract_equals_marginal(f):
    keep = f.names[:1]
    assert np.allclose(contract([f], keep).values, marginal(f, keep).values, rtol=1e-12, atol=0)
