"""Exact differential polynomials in the Frenet curvatures and the constant K.

A :class:`DiffPoly` is a polynomial with rational coefficients in the
symbols ``k{i}.d{m}`` (the m-th arclength derivative of the i-th curvature)
and a distinguished constant ``K`` that never differentiates.

Text grammar (deterministic, round-trips through :func:`parse_poly`)::

    poly    := "0" | term (("+" | "-") term)*
    term    := [coeff "*"] factor ("*" factor)* | coeff
    coeff   := integer | integer "/" integer
    factor  := "K" ["^" exp] | "k" index ["." "d" order] ["^" exp]

so ``-3*k1.d1*k2^2`` is ``-3 κ₁' κ₂²`` and ``2/3*K*k1`` is ``(2/3) K κ₁``.
A leading ``-`` is allowed; unit coefficients are omitted on output.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, NamedTuple, Union

__all__ = [
    "K",
    "CurvatureSymbol",
    "Monomial",
    "DiffPoly",
    "SubstitutionConflict",
    "kappa",
    "const",
    "poly_add",
    "poly_mul",
    "poly_differentiate",
    "poly_substitute",
    "poly_normalize",
    "parse_poly",
    "format_poly",
    "poly_to_json",
    "poly_from_json",
]


class CurvatureSymbol(NamedTuple):
    """``κ_index`` differentiated ``order`` times with respect to arclength.

    Symbols order lexicographically on ``(index, order)``.
    """

    index: int
    order: int = 0

    def derivative(self) -> "CurvatureSymbol":
        return CurvatureSymbol(self.index, self.order + 1)

    def __str__(self) -> str:
        if self.order:
            return f"k{self.index}.d{self.order}"
        return f"k{self.index}"


class _KSymbol:
    """Singleton marker for the sectional-curvature constant."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "K"

    __str__ = __repr__

    def __reduce__(self):
        return (_KSymbol, ())


K = _KSymbol()

Symbol = Union[CurvatureSymbol, _KSymbol]

# internal monomial key: (((index, order), exp), ...) sorted, k_power
_Key = tuple


class SubstitutionConflict(ValueError):
    """Raised when one symbol is given two different substitution rules."""


def _check_symbol(sym: CurvatureSymbol) -> CurvatureSymbol:
    if not isinstance(sym.index, int) or not isinstance(sym.order, int):
        raise TypeError(f"curvature symbol fields must be integers: {sym!r}")
    if sym.index < 1 or sym.order < 0:
        raise ValueError(f"invalid curvature symbol {sym!r}: need index >= 1, order >= 0")
    return sym


@dataclass(frozen=True)
class Monomial:
    """``coefficient * K**k_power * prod(sym**exp)``.

    ``factors`` is stored as a sorted tuple of ``(CurvatureSymbol, exponent)``
    pairs; a mapping is accepted on construction. Zero exponents are dropped.
    """

    coefficient: Fraction
    factors: tuple = ()
    k_power: int = 0

    def __post_init__(self):
        items = self.factors.items() if isinstance(self.factors, Mapping) else self.factors
        merged: dict[CurvatureSymbol, int] = {}
        for sym, exp in items:
            sym = _check_symbol(CurvatureSymbol(*sym))
            if exp < 0:
                raise ValueError(f"negative exponent for {sym}")
            merged[sym] = merged.get(sym, 0) + exp
        if self.k_power < 0:
            raise ValueError("negative power of K")
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))
        object.__setattr__(
            self, "factors", tuple(sorted((s, e) for s, e in merged.items() if e))
        )

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.factors) + self.k_power

    def _key(self) -> _Key:
        return (tuple((tuple(s), e) for s, e in self.factors), self.k_power)


def _order_key(key: _Key):
    """Sort key for descending graded-lex order.

    Variables rank κ_(1,0) > κ_(1,1) > ... > κ_(2,0) > ... > K.
    """
    factors, kpow = key
    deg = kpow + sum(e for _, e in factors)
    lex = [(-i, -m, e) for (i, m), e in factors]
    if kpow:
        lex.append((-(10**9), 0, kpow))
    return (deg, tuple(lex))


def _mul_keys(a: _Key, b: _Key) -> _Key:
    fa, ka = a
    fb, kb = b
    if not fa:
        return (fb, ka + kb)
    if not fb:
        return (fa, ka + kb)
    merged = dict(fa)
    for s, e in fb:
        merged[s] = merged.get(s, 0) + e
    return (tuple(sorted(merged.items())), ka + kb)


class DiffPoly:
    """Immutable normalized differential polynomial.

    Equality is structural on the canonical form; hashing is supported.
    """

    __slots__ = ("_terms", "_sorted", "_hash")

    def __init__(self, terms: Mapping | None = None):
        # trusted constructor: terms already merged, no zero coefficients
        self._terms: dict = dict(terms) if terms else {}
        self._sorted = None
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def _from_raw(cls, items: Iterable) -> "DiffPoly":
        acc: dict = {}
        for key, c in items:
            if c:
                acc[key] = acc.get(key, 0) + c
        return cls({k: Fraction(c) for k, c in acc.items() if c})

    @classmethod
    def from_monomials(cls, monomials: Iterable[Monomial]) -> "DiffPoly":
        return cls._from_raw((m._key(), m.coefficient) for m in monomials)

    @classmethod
    def constant(cls, value) -> "DiffPoly":
        value = Fraction(value)
        return cls({((), 0): value}) if value else cls()

    @classmethod
    def symbol(cls, sym: Symbol, power: int = 1) -> "DiffPoly":
        if power < 0:
            raise ValueError("negative power")
        if power == 0:
            return cls.constant(1)
        if sym is K:
            return cls({((), power): Fraction(1)})
        sym = _check_symbol(CurvatureSymbol(*sym))
        return cls({(((tuple(sym), power),), 0): Fraction(1)})

    # views ------------------------------------------------------------
    @property
    def terms(self) -> tuple[Monomial, ...]:
        """Monomials in descending canonical order."""
        if self._sorted is None:
            keys = sorted(self._terms, key=_order_key, reverse=True)
            self._sorted = tuple(
                Monomial(self._terms[k], tuple((CurvatureSymbol(*s), e) for s, e in k[0]), k[1])
                for k in keys
            )
        return self._sorted

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def symbols(self) -> set[CurvatureSymbol]:
        return {CurvatureSymbol(*s) for fs, _ in self._terms for s, _ in fs}

    def has_k(self) -> bool:
        return any(kp for _, kp in self._terms)

    def max_order(self) -> int:
        """Highest derivative order appearing, or -1 for a constant."""
        return max((s[1] for fs, _ in self._terms for s, _ in fs), default=-1)

    def content(self) -> Fraction:
        """Positive rational content (gcd of numerators / lcm of denominators)."""
        num = 0
        den = 1
        for c in self._terms.values():
            num = gcd(num, c.numerator)
            den = den * c.denominator // gcd(den, c.denominator)
        return Fraction(num, den) if num else Fraction(0)

    def leading_coefficient(self) -> Fraction:
        return self.terms[0].coefficient if self._terms else Fraction(0)

    def primitive(self) -> "DiffPoly":
        """Divide by the content, with the leading coefficient made positive."""
        if not self._terms:
            return self
        c = self.content()
        if self.leading_coefficient() < 0:
            c = -c
        return self.scale(1 / c)

    # arithmetic -------------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.constant(other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __add__(self, other) -> "DiffPoly":
        other = _coerce(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        acc = dict(self._terms)
        for k, c in other._terms.items():
            v = acc.get(k)
            if v is None:
                acc[k] = c
            else:
                v += c
                if v:
                    acc[k] = v
                else:
                    del acc[k]
        return DiffPoly(acc)

    __radd__ = __add__

    def __neg__(self) -> "DiffPoly":
        return DiffPoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other) -> "DiffPoly":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "DiffPoly":
        return _coerce(other) - self

    def __mul__(self, other) -> "DiffPoly":
        other = _coerce(other)
        if not self._terms or not other._terms:
            return DiffPoly()
        acc: dict = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                k = _mul_keys(ka, kb)
                acc[k] = acc.get(k, 0) + ca * cb
        return DiffPoly({k: c for k, c in acc.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "DiffPoly":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = DiffPoly.constant(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def scale(self, factor) -> "DiffPoly":
        factor = Fraction(factor)
        if not factor:
            return DiffPoly()
        return DiffPoly({k: c * factor for k, c in self._terms.items()})

    def differentiate(self) -> "DiffPoly":
        """Formal d/dt: κ_i^(m) -> κ_i^(m+1), K constant, Leibniz rule."""
        acc: dict = {}
        for (factors, kpow), c in self._terms.items():
            for pos, ((i, m), e) in enumerate(factors):
                new = dict(factors)
                if e == 1:
                    del new[(i, m)]
                else:
                    new[(i, m)] = e - 1
                up = (i, m + 1)
                new[up] = new.get(up, 0) + 1
                key = (tuple(sorted(new.items())), kpow)
                acc[key] = acc.get(key, 0) + c * e
        return DiffPoly({k: c for k, c in acc.items() if c})

    def divide_by_monomial(self, monomial: "DiffPoly") -> "DiffPoly":
        """Exact division by a single-term polynomial; ValueError if inexact."""
        if len(monomial) != 1:
            raise ValueError("divisor must be a single monomial")
        (dkey, dc), = monomial._terms.items()
        dfac = dict(dkey[0])
        out = {}
        for (factors, kpow), c in self._terms.items():
            if kpow < dkey[1]:
                raise ValueError(f"{format_poly(self)} is not divisible by {format_poly(monomial)}")
            new = dict(factors)
            for s, e in dfac.items():
                have = new.get(s, 0)
                if have < e:
                    raise ValueError(
                        f"{format_poly(self)} is not divisible by {format_poly(monomial)}"
                    )
                if have == e:
                    del new[s]
                else:
                    new[s] = have - e
            out[(tuple(sorted(new.items())), kpow - dkey[1])] = c / dc
        return DiffPoly(out)

    def substitute(self, rules) -> "DiffPoly":
        return poly_substitute(self, rules)

    def evaluate(self, values: Mapping, k_value=0.0):
        """Numeric value; ``values`` maps CurvatureSymbol -> number or array.

        Missing symbols raise KeyError naming the symbol.
        """
        total = 0.0
        for (factors, kpow), c in self._terms.items():
            term = float(c)
            if kpow:
                term = term * k_value**kpow
            for s, e in factors:
                sym = CurvatureSymbol(*s)
                if sym not in values:
                    raise KeyError(sym)
                term = term * values[sym] ** e
            total = total + term
        return total

    def __repr__(self) -> str:
        return f"DiffPoly({format_poly(self)!r})"

    def __str__(self) -> str:
        return format_poly(self)


def _coerce(x) -> DiffPoly:
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Fraction)):
        return DiffPoly.constant(x)
    raise TypeError(f"cannot use {type(x).__name__} as a DiffPoly")


def kappa(index: int, order: int = 0) -> DiffPoly:
    """The polynomial ``κ_index^(order)``."""
    return DiffPoly.symbol(CurvatureSymbol(index, order))


def const(value) -> DiffPoly:
    return DiffPoly.constant(value)


# functional surface ---------------------------------------------------

def poly_add(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return a + b


def poly_mul(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return a * b


def poly_differentiate(a: DiffPoly) -> DiffPoly:
    return a.differentiate()


def poly_normalize(a) -> DiffPoly:
    """Canonical form of a DiffPoly or of a raw iterable of Monomials."""
    if isinstance(a, DiffPoly):
        return DiffPoly._from_raw(a._terms.items())
    return DiffPoly.from_monomials(a)


def _normalize_rules(rules) -> dict:
    items = rules.items() if isinstance(rules, Mapping) else rules
    out: dict = {}
    for key, value in items:
        if key is not K:
            key = _check_symbol(CurvatureSymbol(*key))
        value = _coerce(value)
        if key in out and out[key] != value:
            raise SubstitutionConflict(
                f"conflicting rules for {key}: {out[key]} vs {value}"
            )
        out[key] = value
    return out


def poly_substitute(a: DiffPoly, rules) -> DiffPoly:
    """Simultaneous substitution of symbols (and/or ``K``) by polynomials.

    ``rules`` is a mapping or an iterable of ``(symbol, replacement)`` pairs.
    Giving one symbol two different replacements raises SubstitutionConflict.
    """
    rules = _normalize_rules(rules)
    if not rules or not a._terms:
        return a
    sym_rules = {tuple(s): v for s, v in rules.items() if s is not K}
    k_rule = rules.get(K)
    powers: dict = {}

    def power(key, base, e):
        p = powers.get((key, e))
        if p is None:
            p = base**e
            powers[(key, e)] = p
        return p

    acc: dict = {}
    for (factors, kpow), c in a._terms.items():
        kept = []
        replaced = []
        for s, e in factors:
            rule = sym_rules.get(s)
            if rule is None:
                kept.append((s, e))
            elif not rule._terms:
                break
            else:
                replaced.append(power(s, rule, e))
        else:
            if kpow and k_rule is not None:
                if not k_rule._terms:
                    continue
                replaced.append(power("K", k_rule, kpow))
                kpow = 0
            base = DiffPoly({(tuple(kept), kpow): c})
            for r in replaced:
                base = base * r
            for k, v in base._terms.items():
                acc[k] = acc.get(k, 0) + v
    return DiffPoly({k: c for k, c in acc.items() if c})


# serialization --------------------------------------------------------

def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _format_monomial(m: Monomial) -> tuple[str, str]:
    """(sign, body) for a monomial."""
    parts = []
    if m.k_power:
        parts.append("K" if m.k_power == 1 else f"K^{m.k_power}")
    for sym, e in m.factors:
        parts.append(str(sym) if e == 1 else f"{sym}^{e}")
    c = abs(m.coefficient)
    sign = "-" if m.coefficient < 0 else "+"
    if not parts:
        return sign, _format_coeff(c)
    if c == 1:
        return sign, "*".join(parts)
    # K sits before the curvature factors on output: canonical order is by symbol
    return sign, _format_coeff(c) + "*" + "*".join(parts)


def format_poly(p: DiffPoly) -> str:
    if not p._terms:
        return "0"
    out = []
    for n, m in enumerate(p.terms):
        sign, body = _format_monomial(m)
        if n == 0:
            out.append(body if sign == "+" else "-" + body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<K>K)|k(?P<idx>\d+)(?:\.d(?P<ord>\d+))?|(?P<op>[-+*^()]))"
)


def parse_poly(text: str) -> DiffPoly:
    """Parse the text grammar documented at module level.

    Parentheses and ``^`` on parenthesized groups are accepted as a
    convenience for hand-written input (e.g. ``k1*(k1^2 + k2^2)^2``).
    """
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse {text!r} at position {pos}")
        pos = m.end()
        if m.group("num"):
            tokens.append(("num", Fraction(m.group("num"))))
        elif m.group("K"):
            tokens.append(("sym", K))
        elif m.group("idx"):
            tokens.append(
                ("sym", CurvatureSymbol(int(m.group("idx")), int(m.group("ord") or 0)))
            )
        else:
            tokens.append(("op", m.group("op")))
        # skip trailing whitespace
        while pos < len(text) and text[pos].isspace():
            pos += 1
    parser = _Parser(tokens, text)
    result = parser.expr()
    if parser.i != len(tokens):
        raise ValueError(f"trailing input in {text!r}")
    return result


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self) -> DiffPoly:
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        elif self.peek() == ("op", "+"):
            self.take()
        total = self.term().scale(sign)
        while self.peek() in (("op", "+"), ("op", "-")):
            _, op = self.take()
            t = self.term()
            total = total + t if op == "+" else total - t
        return total

    def term(self) -> DiffPoly:
        result = self.power()
        while self.peek() == ("op", "*"):
            self.take()
            result = result * self.power()
        return result

    def power(self) -> DiffPoly:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            if kind != "num" or val.denominator != 1:
                raise ValueError(f"bad exponent in {self.text!r}")
            base = base ** int(val)
        return base

    def atom(self) -> DiffPoly:
        kind, val = self.take()
        if kind == "num":
            return DiffPoly.constant(val)
        if kind == "sym":
            return DiffPoly.symbol(val)
        if (kind, val) == ("op", "("):
            inner = self.expr()
            if self.take() != ("op", ")"):
                raise ValueError(f"unbalanced parentheses in {self.text!r}")
            return inner
        raise ValueError(f"unexpected token {val!r} in {self.text!r}")


def poly_to_json(p: DiffPoly) -> dict:
    """JSON term list; coefficients are exact rational strings."""
    return {
        "terms": [
            {
                "coefficient": _format_coeff(m.coefficient),
                "k_power": m.k_power,
                "factors": [
                    {"index": s.index, "order": s.order, "exponent": e} for s, e in m.factors
                ],
            }
            for m in p.terms
        ]
    }


def poly_from_json(data: Mapping) -> DiffPoly:
    return DiffPoly.from_monomials(
        Monomial(
            Fraction(t["coefficient"]),
            tuple(((f["index"], f["order"]), f["exponent"]) for f in t["factors"]),
            t.get("k_power", 0),
        )
        for t in data["terms"]
    )
