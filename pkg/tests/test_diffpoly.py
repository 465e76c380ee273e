import json
from fractions import Fraction
from pathlib import Path

import jsonschema
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from kharmonic.diffpoly import (
    K,
    CurvatureSymbol,
    DiffPoly,
    Monomial,
    SubstitutionConflict,
    format_poly,
    kappa,
    parse_poly,
    poly_add,
    poly_differentiate,
    poly_from_json,
    poly_mul,
    poly_normalize,
    poly_substitute,
    poly_to_json,
)

from conftest import T, polys, rule_sets, small_polys, sympy_equal, sympy_kappa, to_sympy

SCHEMAS = Path(__file__).resolve().parents[1] / "src" / "kharmonic" / "schemas"
P = parse_poly
k1, k2, k3 = kappa(1), kappa(2), kappa(3)
Kp = DiffPoly.symbol(K)


# poly_add ---------------------------------------------------------------

def test_add_inverse():
    assert poly_add(k1**3, -(k1**3)).is_zero()


def test_add_assembles_second_component():
    got = poly_add(kappa(1, 2) - k1**3, -(k1 * k2**2))
    assert got == P("k1.d2 - k1^3 - k1*k2^2")
    assert len(got) == 3


def test_add_merges_like_terms():
    a = P("2*k1.d1*k2")
    assert poly_add(a, P("k1.d1*k2")) == P("3*k1.d1*k2")
    assert len(poly_add(a, a)) == 1


# poly_mul ----------------------------------------------------------------

def test_mul_distributes():
    assert poly_mul(k1, k1**2 + k2**2) == k1**3 + k1 * k2**2


def test_mul_degree_five_part():
    got = poly_mul(k1, (k1**2 + k2**2) ** 2)
    assert got == P("k1^5 + 2*k1^3*k2^2 + k1*k2^4")


@given(polys)
def test_mul_by_zero(p):
    assert poly_mul(DiffPoly(), p).is_zero()


# poly_differentiate ---------------------------------------------------------

def test_differentiate_product():
    assert poly_differentiate(k1 * k2) == kappa(1, 1) * k2 + k1 * kappa(2, 1)


def test_differentiate_matches_sympy_oracle():
    p = P("-3*k1.d1*k2^2")
    want = sp.diff(-3 * sympy_kappa(1, 1) * sympy_kappa(2) ** 2, T)
    assert sympy_equal(to_sympy(poly_differentiate(p)), want)
    assert poly_differentiate(p) == P("-3*k1.d2*k2^2 - 6*k1.d1*k2*k2.d1")


def test_differentiate_constant_curvature():
    assert poly_differentiate(Kp).is_zero()
    assert poly_differentiate(DiffPoly.constant(7)).is_zero()


@settings(max_examples=200, deadline=None)
@given(polys)
def test_differentiate_agrees_with_sympy(p):
    assert sympy_equal(to_sympy(p.differentiate()), sp.diff(to_sympy(p), T))


# poly_substitute --------------------------------------------------------------

def test_substitute_biharmonic_relation_kills_second_equation():
    e2 = P("k1.d2 - k1^3 - k1*k2^2 + K*k1")
    rules = {CurvatureSymbol(1, 2): DiffPoly(), K: k1**2 + k2**2}
    assert poly_substitute(e2, rules).is_zero()


def test_substitute_zero():
    assert poly_substitute(k1 * k2 * k3, {CurvatureSymbol(2): 0}).is_zero()


def test_substitute_vacuous_rule():
    p = P("k1^5 + 2*k1^3*k2^2 + k1*k2^4")
    assert poly_substitute(p, {K: k1**2 + k2**2}) == p


def test_substitute_is_simultaneous():
    # k1 -> k2, k2 -> k1 swaps rather than collapsing
    p = P("k1^2*k2")
    assert poly_substitute(p, {CurvatureSymbol(1): k2, CurvatureSymbol(2): k1}) == P("k1*k2^2")


def test_substitute_conflict_rejected():
    with pytest.raises(SubstitutionConflict):
        poly_substitute(k1, [(CurvatureSymbol(1), k2), (CurvatureSymbol(1), k3)])
    # repeating an identical rule is not a conflict
    assert poly_substitute(k1, [(CurvatureSymbol(1), k2), (CurvatureSymbol(1), k2)]) == k2


# poly_normalize -----------------------------------------------------------------

def test_normalize_orders_factors():
    m = Monomial(1, {CurvatureSymbol(2): 1, CurvatureSymbol(1): 1})
    assert poly_normalize([m]) == k1 * k2
    assert format_poly(poly_normalize([m])) == "k1*k2"


def test_normalize_cancels():
    ms = [Monomial(1, {(1, 0): 1}), Monomial(1, {(1, 0): 1}), Monomial(-2, {(1, 0): 1})]
    assert poly_normalize(ms).is_zero()


def test_normalize_keeps_content():
    p = P("6*k1 + 4*k2")
    assert poly_normalize(p) == p
    assert p.content() == 2
    assert p.primitive() == P("3*k1 + 2*k2")


@settings(max_examples=1000)
@given(st.lists(st.builds(Monomial, st.integers(-3, 3), st.dictionaries(st.tuples(st.integers(1, 3), st.integers(0, 2)), st.integers(0, 2), max_size=3), st.integers(0, 1)), max_size=6))
def test_normalize_idempotent(ms):
    once = poly_normalize(ms)
    assert poly_normalize(once) == once
    assert once.terms == poly_normalize(once).terms
    assert all(m.coefficient != 0 for m in once.terms)
    assert all(e > 0 for m in once.terms for _, e in m.factors)


def test_monomial_rejects_bad_symbols():
    with pytest.raises(ValueError):
        Monomial(1, {(0, 0): 1})
    with pytest.raises(ValueError):
        Monomial(1, {(1, -1): 1})
    with pytest.raises(ValueError):
        Monomial(1, {(1, 0): -1})


def test_canonical_order_is_graded_first():
    p = P("k1.d2 - k1^3 + K*k1")
    degrees = [m.degree for m in p.terms]
    assert degrees == sorted(degrees, reverse=True)
    assert p.terms[0].factors == ((CurvatureSymbol(1), 3),)


def test_symbol_order():
    syms = [CurvatureSymbol(2, 0), CurvatureSymbol(1, 3), CurvatureSymbol(1, 0)]
    assert sorted(syms) == [CurvatureSymbol(1, 0), CurvatureSymbol(1, 3), CurvatureSymbol(2, 0)]


# ring axioms and derivation -------------------------------------------------------

@settings(max_examples=1000)
@given(polys, polys, polys)
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@settings(max_examples=1000)
@given(polys, polys)
def test_differentiate_is_derivation(a, b):
    assert (a * b).differentiate() == a.differentiate() * b + a * b.differentiate()


@settings(max_examples=1000)
@given(small_polys, small_polys, rule_sets)
def test_substitution_homomorphism(a, b, rules):
    assert poly_substitute(a * b, rules) == poly_substitute(a, rules) * poly_substitute(b, rules)
    assert poly_substitute(a + b, rules) == poly_substitute(a, rules) + poly_substitute(b, rules)


@settings(max_examples=300)
@given(polys)
def test_coefficients_stay_exact(p):
    q = (p * p).differentiate()
    assert all(isinstance(m.coefficient, Fraction) for m in q.terms)


# serialization ----------------------------------------------------------------------

def test_text_grammar_examples():
    assert format_poly(P("-3*k1.d1*k2^2")) == "-3*k1.d1*k2^2"
    assert format_poly(P("2/3*K*k1")) == "2/3*K*k1"
    assert format_poly(DiffPoly()) == "0"
    assert P("k1*(k1^2 + k2^2)^2") == P("k1^5 + 2*k1^3*k2^2 + k1*k2^4")


@pytest.mark.parametrize("bad", ["k1 +", "k0", "3**k1", "k1^x", "(k1"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        P(bad)


@settings(max_examples=500)
@given(polys)
def test_text_round_trip(p):
    assert P(format_poly(p)) == p


@settings(max_examples=300)
@given(polys)
def test_json_round_trip(p):
    data = poly_to_json(p)
    jsonschema.validate(data, json.loads((SCHEMAS / "diffpoly.schema.json").read_text()))
    assert poly_from_json(json.loads(json.dumps(data))) == p


def test_divide_by_monomial():
    p = P("-3*k1*k1.d1")
    assert p.divide_by_monomial(k1) == P("-3*k1.d1")
    with pytest.raises(ValueError):
        P("k1 + k2").divide_by_monomial(k1)
