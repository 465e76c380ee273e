"""Exit criteria. Each test appends one PASS/FAIL line to the terminal summary."""
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from kharmonic.cli import main
from kharmonic.diffpoly import K, CurvatureSymbol, DiffPoly, Monomial, kappa, poly_normalize, poly_substitute
from kharmonic.equations import (
    FAIL,
    PASS,
    SIGN_NOTE,
    ConstraintSet,
    apply_constraints,
    biharmonic_constraints,
    kharmonic_system,
    load_displays,
    minus_k_system,
    systems_equivalent,
    verify_biharmonic_implies_kharmonic,
    verify_proposition,
)
from kharmonic.frenet import (
    FrameField,
    connection_matrix,
    covariant_derivative,
    curvature_operator,
    inner,
    nabla_nabla,
    nabla_nabla_power,
    tension,
)
from kharmonic.geometry import (
    CurvatureProfile,
    PolynomialProfile,
    SinusoidProfile,
    covariant_derivative_series,
    evaluate_along,
    integrate_frenet,
    make_model_space,
    numeric_residual,
)

from conftest import ACCEPTANCE_LINES


@contextmanager
def criterion(number, title):
    info = {}
    try:
        yield info
    except BaseException:
        ACCEPTANCE_LINES.append(f"[{number:2d}] FAIL  {title}  {info.get('detail', '')}")
        raise
    ACCEPTANCE_LINES.append(f"[{number:2d}] PASS  {title}  {info.get('detail', '')}")


def test_01_eq7_reproduction():
    with criterion(1, "(nabla nabla)(k1 e2) equals the transcribed field exactly, < 1 s") as info:
        start = time.perf_counter()
        got = nabla_nabla(tension(5))
        elapsed = time.perf_counter() - start
        want = load_displays("Eq7")
        assert got == want
        assert all(got[i] for i in range(1, 5))
        assert elapsed < 1.0
        info["detail"] = f"4 components exact, {elapsed * 1e3:.1f} ms"


def test_02_second_iterate_reproduction():
    with criterion(2, "(nabla nabla)^2 tau matches all six reference components, < 1 s") as info:
        start = time.perf_counter()
        got = nabla_nabla_power(2, 7)[2]
        elapsed = time.perf_counter() - start
        want = load_displays("Expansion2")
        for i in range(1, 8):
            assert got[i] == want[i], f"component e{i}"
        assert got[6] == kappa(1) * kappa(2) * kappa(3) * kappa(4) * kappa(5)
        assert elapsed < 1.0
        info["detail"] = f"6 components exact, {elapsed * 1e3:.1f} ms"


def test_03_three_harmonic_system():
    with criterion(3, "3-harmonic system equals the reference system up to positive scaling, e1 factor 5, < 5 s") as info:
        start = time.perf_counter()
        derived = kharmonic_system(3, 7)
        rep = systems_equivalent(derived, load_displays("Prop5"))
        elapsed = time.perf_counter() - start
        assert rep.status == PASS
        scales = [m.scale for m in rep.per_equation[:6]]
        assert scales[0] == Fraction(5)
        assert all(s > 0 for s in scales)
        assert elapsed < 5.0
        info["detail"] = f"scales {[str(s) for s in scales]}, {elapsed:.2f} s"


def test_04_biharmonic_consistency():
    with criterion(4, "k=2 raw system matches and vanishes on both branches under the solved constraints") as info:
        derived = kharmonic_system(2, 5)
        expected = [
            kappa(1) * kappa(1, 1),
            kappa(1, 2) - kappa(1) ** 3 - kappa(1) * kappa(2) ** 2 + DiffPoly.symbol(K) * kappa(1),
            kappa(1, 1) * kappa(2) * 2 + kappa(1) * kappa(2, 1),
            kappa(1) * kappa(2) * kappa(3),
        ]
        for got, want in zip(derived.equations, expected):
            assert got.primitive() == want.primitive()
        assert derived.equations[4].is_zero()
        branches = apply_constraints(FrameField(5, derived.equations), biharmonic_constraints())
        assert len(branches) == 2
        for br in branches:
            assert not br.vacuous and br.field.is_zero(), br.constraints.label
        assert verify_proposition("Prop4").passed
        info["detail"] = "4 equations matched; branches k2=0, k3=0 vanish"


def test_05_biharmonic_is_kharmonic():
    with criterion(5, "k = 2..10, both branches: tau_k vanishes and iterate identity holds, < 60 s") as info:
        start = time.perf_counter()
        rep = verify_biharmonic_implies_kharmonic(10)
        elapsed = time.perf_counter() - start
        assert rep.status == PASS
        assert sorted({(m.index, m.branch) for m in rep.per_equation}) == sorted(
            (k, b) for k in range(2, 11) for b in ("biharmonic & k2=0", "biharmonic & k3=0")
        )
        # generic build-then-substitute route agrees where it is affordable
        assert verify_biharmonic_implies_kharmonic(5, interleave=False).status == PASS
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        info["detail"] = f"18 (k, branch) cases, {elapsed:.2f} s"


def test_06_sign_discrepancy():
    with criterion(6, "-K variant fails against the derived k=2 system only on e2; report carries the note") as info:
        rep = systems_equivalent(minus_k_system(2, 5), kharmonic_system(2, 5))
        assert rep.status == FAIL
        assert [m.index for m in rep.per_equation if not m.match] == [2]
        assert SIGN_NOTE in verify_proposition("Prop4").notes
        info["detail"] = f"mismatch at e2 ({rep.per_equation[1].mismatch})"


def test_07_numeric_biharmonic_circle():
    with criterion(7, "S^2 circle k1=1 closes after pi*sqrt(2) (< 1e-6), residual k=2..6 < 1e-8") as info:
        s2 = make_model_space(1.0, 2)
        tr = integrate_frenet(s2, CurvatureProfile.constant(1.0), t_end=np.pi * np.sqrt(2), h=1e-3)
        closure = float(np.linalg.norm(tr.p[-1] - tr.p[0]))
        assert closure < 1e-6
        worst = max(float(numeric_residual(tr, k).max()) for k in range(2, 7))
        assert worst < 1e-8
        info["detail"] = f"closure {closure:.2e}, max residual {worst:.2e}"


def _orders(space, profile):
    n = space.dim
    errs = {"tau": [], "nabla nabla tau": []}
    for h in (1e-2, 5e-3, 2.5e-3):
        tr = integrate_frenet(space, profile, t_end=1.0, h=h)
        i = int(round(0.5 / tr.h))
        y = evaluate_along(tension(n), tr)
        d1 = covariant_derivative_series(tr, y)
        d2 = covariant_derivative_series(tr, d1)
        errs["tau"].append(np.linalg.norm(d1[i] - evaluate_along(covariant_derivative(tension(n)), tr)[i]))
        errs["nabla nabla tau"].append(np.linalg.norm(d2[i] - evaluate_along(nabla_nabla(tension(n)), tr)[i]))
    return {key: np.log2(np.array(e[:-1]) / np.array(e[1:])) for key, e in errs.items()}


def test_08_cross_validation_order():
    with criterion(8, "finite-difference vs symbolic convergence order 2.0 +- 0.2 on S^2 and S^3") as info:
        cases = {
            "S2": (make_model_space(1.0, 2), CurvatureProfile((SinusoidProfile(1.0, 0.3, 1.0),))),
            "S3": (
                make_model_space(1.0, 3),
                CurvatureProfile((SinusoidProfile(1.0, 0.3, 1.0), PolynomialProfile((0.5, 0.2, -0.1)))),
            ),
        }
        seen = []
        for name, (space, prof) in cases.items():
            for key, orders in _orders(space, prof).items():
                assert np.all(np.abs(orders - 2.0) <= 0.2), (name, key, orders)
                seen.extend(orders)
        info["detail"] = f"orders in [{min(seen):.4f}, {max(seen):.4f}]"


def test_09_negative_control(capsys):
    with criterion(9, "H^2 k1=1: k=2 max residual 2 within 1e-6; check-curve exits 3") as info:
        h2 = make_model_space(-1.0, 2)
        tr = integrate_frenet(h2, CurvatureProfile.constant(1.0), t_end=2.0, h=1e-3)
        worst = float(numeric_residual(tr, 2).max())
        assert abs(worst - 2.0) < 1e-6
        code = main(["check-curve", "--K", "-1", "--dim", "2", "--kappa", "1", "--t-end", "2", "--k", "2"])
        capsys.readouterr()
        assert code == 3
        info["detail"] = f"max residual {worst:.9f}, exit {code}"


# criterion 10: seeded random batteries, 1000 cases per property -------------------------

N_CASES = 1000


def _rand_poly(rng, terms=3):
    ms = []
    for _ in range(rng.randint(0, terms)):
        factors = {}
        for _ in range(rng.randint(0, 2)):
            factors[(rng.randint(1, 3), rng.randint(0, 2))] = rng.randint(1, 2)
        coeff = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.choice([1, 1, 2, 3]))
        ms.append(Monomial(coeff, factors, rng.randint(0, 1)))
    return DiffPoly.from_monomials(ms)


def _rand_field(rng, n, terms=2):
    return FrameField(n, tuple(_rand_poly(rng, terms) for _ in range(n)))


def _drop(index):
    return lambda p: poly_substitute(p, {s: DiffPoly() for s in p.symbols() if s.index == index})


def test_10_property_suites():
    with criterion(10, "diffpoly/frenet properties on 1000 random cases each; geodesic kills k=2..6") as info:
        rng = random.Random(20261019)
        counts = {}

        def tally(name):
            counts[name] = counts.get(name, 0) + 1

        for _ in range(N_CASES):
            a, b, c = (_rand_poly(rng) for _ in range(3))
            assert a + b == b + a and (a + b) + c == a + (b + c)
            assert a * b == b * a and (a * b) * c == a * (b * c)
            assert a * (b + c) == a * b + a * c
            tally("ring axioms")
            assert (a * b).differentiate() == a.differentiate() * b + a * b.differentiate()
            tally("derivation")
            raw = list(a.terms) + list(b.terms) + [Monomial(-m.coefficient, m.factors, m.k_power) for m in a.terms]
            once = poly_normalize(raw)
            assert poly_normalize(once) == once and once == b
            tally("normalize idempotent")
            rules = {}
            for _ in range(rng.randint(0, 2)):
                key = K if rng.random() < 0.3 else CurvatureSymbol(rng.randint(1, 3), rng.randint(0, 2))
                rules[key] = _rand_poly(rng, 2)
            x, y = _rand_poly(rng, 2), _rand_poly(rng, 2)
            assert poly_substitute(x * y, rules) == poly_substitute(x, rules) * poly_substitute(y, rules)
            assert poly_substitute(x + y, rules) == poly_substitute(x, rules) + poly_substitute(y, rules)
            tally("substitution homomorphism")
            assert all(isinstance(m.coefficient, Fraction) for m in (a * b).differentiate().terms)
            tally("exact arithmetic")

            n = rng.randint(2, 5)
            v, w = _rand_field(rng, n), _rand_field(rng, n)
            f = _rand_poly(rng, 2)
            assert covariant_derivative(v * f) == v * f.differentiate() + covariant_derivative(v) * f
            tally("Leibniz")
            lhs = inner(v, w).differentiate()
            assert lhs == inner(covariant_derivative(v), w) + inner(covariant_derivative(w), v)
            tally("metric compatibility")
            assert curvature_operator(v)[1].is_zero()
            tally("curvature operator tangent-free")
            m = rng.randint(3, 6)
            j = rng.randint(0, 2)
            drop = _drop(m - 1)
            small = _rand_field(rng, m - 1, 1).map(drop)
            big = FrameField(m, small.coeffs + (DiffPoly(),))
            for _ in range(j):
                small, big = nabla_nabla(small), nabla_nabla(big)
            big = big.map(drop)
            assert big.coeffs[:-1] == small.coeffs and big.coeffs[-1].is_zero()
            tally("dimension truncation")

        for n in range(2, 10):
            a = connection_matrix(n)
            assert all(a[i][j] == -a[j][i] for i in range(n) for j in range(n))
        tally("connection skew (n=2..9)")
        for k in range(1, 6):
            prod = DiffPoly.constant(1)
            for i in range(1, 2 * k + 2):
                prod = prod * kappa(i)
            assert nabla_nabla_power(k, 2 * k + 2)[k][2 * k + 2] == prod
        tally("highest component (k<=5)")

        kill = ConstraintSet(zeros={1}).reducer()
        for k in range(2, 7):
            assert kharmonic_system(k, 2 * k + 2).map(kill).is_zero()
        tally("geodesic annihilation k=2..6")

        randomized = [name for name, c in counts.items() if c >= N_CASES]
        assert len(randomized) == 9
        info["detail"] = f"{len(randomized)} randomized properties x {N_CASES}, plus 3 exhaustive checks"
