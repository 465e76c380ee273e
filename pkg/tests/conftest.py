from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import strategies as st

from kharmonic.diffpoly import K, CurvatureSymbol, DiffPoly, Monomial
from kharmonic.frenet import FrameField

T = sp.Symbol("t")
K_SYM = sp.Symbol("K")


def to_sympy(p: DiffPoly):
    """Independent sympy image: kappa_i are functions of t, K a symbol."""
    expr = sp.Integer(0)
    for m in p.terms:
        term = sp.Rational(m.coefficient.numerator, m.coefficient.denominator) * K_SYM**m.k_power
        for sym, e in m.factors:
            f = sp.Function(f"kappa{sym.index}")(T)
            term *= (sp.diff(f, T, sym.order) if sym.order else f) ** e
        expr += term
    return expr


def sympy_kappa(i, order=0):
    f = sp.Function(f"kappa{i}")(T)
    return sp.diff(f, T, order) if order else f


def sympy_equal(a, b) -> bool:
    return sp.expand(a - b) == 0


coefficients = st.one_of(
    st.integers(-5, 5).filter(bool).map(Fraction),
    st.fractions(min_value=-3, max_value=3, max_denominator=4).filter(bool),
)

symbols = st.builds(CurvatureSymbol, st.integers(1, 3), st.integers(0, 2))

monomials = st.builds(
    Monomial,
    coefficients,
    st.dictionaries(symbols, st.integers(1, 2), max_size=2),
    st.integers(0, 1),
)

polys = st.lists(monomials, max_size=3).map(DiffPoly.from_monomials)
small_polys = st.lists(monomials, max_size=2).map(DiffPoly.from_monomials)


def frame_fields(dim):
    return st.lists(small_polys, min_size=dim, max_size=dim).map(lambda cs: FrameField(dim, tuple(cs)))


rule_keys = st.one_of(symbols, st.just(K))
rule_sets = st.dictionaries(rule_keys, small_polys, max_size=2)


@pytest.fixture
def k1():
    from kharmonic.diffpoly import kappa

    return kappa(1)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
