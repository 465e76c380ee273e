"""Frame fields along a unit-speed curve and the operators acting on them.

A :class:`FrameField` ``V = sum c_i e_i`` has DiffPoly coefficients over
the Frenet frame ``e_1..e_n``. Along an arclength-parametrized curve the
rough Laplacian is ``-nabla nabla`` and, in constant sectional curvature K,
the curvature operator is ``V -> K (V - <V, e_1> e_1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .diffpoly import K, DiffPoly, format_poly, kappa, parse_poly

__all__ = [
    "FrameField",
    "tension",
    "covariant_derivative",
    "rough_laplacian",
    "curvature_operator",
    "nabla_nabla",
    "nabla_nabla_power",
    "tau_k",
    "inner",
    "connection_matrix",
    "default_dim",
    "rough_laplacian_power",
]

Reducer = Callable[[DiffPoly], DiffPoly]


@dataclass(frozen=True)
class FrameField:
    dim: int
    coeffs: tuple

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"frame dimension must be >= 2, got {self.dim}")
        coeffs = tuple(self.coeffs)
        if len(coeffs) != self.dim:
            raise ValueError(f"expected {self.dim} coefficients, got {len(coeffs)}")
        if not all(isinstance(c, DiffPoly) for c in coeffs):
            raise TypeError("frame coefficients must be DiffPoly")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zero(cls, dim: int) -> "FrameField":
        return cls(dim, (DiffPoly(),) * dim)

    @classmethod
    def basis(cls, dim: int, i: int, coeff: DiffPoly | None = None) -> "FrameField":
        """``coeff * e_i`` (1-based ``i``)."""
        if not 1 <= i <= dim:
            raise ValueError(f"basis index {i} out of range for dim {dim}")
        c = [DiffPoly()] * dim
        c[i - 1] = DiffPoly.constant(1) if coeff is None else coeff
        return cls(dim, tuple(c))

    def __getitem__(self, i: int) -> DiffPoly:
        """1-based component access: ``V[2]`` is the e_2 coefficient."""
        if not 1 <= i <= self.dim:
            raise IndexError(i)
        return self.coeffs[i - 1]

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def _check(self, other: "FrameField"):
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "FrameField") -> "FrameField":
        self._check(other)
        return FrameField(self.dim, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "FrameField") -> "FrameField":
        self._check(other)
        return FrameField(self.dim, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "FrameField":
        return FrameField(self.dim, tuple(-c for c in self.coeffs))

    def __mul__(self, f) -> "FrameField":
        """Scalar multiplication by a DiffPoly or rational."""
        return FrameField(self.dim, tuple(c * f for c in self.coeffs))

    __rmul__ = __mul__

    def map(self, fn: Reducer) -> "FrameField":
        return FrameField(self.dim, tuple(fn(c) for c in self.coeffs))

    def to_json(self) -> dict:
        return {"dim": self.dim, "coeffs": [format_poly(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, data) -> "FrameField":
        return cls(int(data["dim"]), tuple(parse_poly(c) for c in data["coeffs"]))

    def __str__(self) -> str:
        parts = [f"({c})e{i}" for i, c in enumerate(self.coeffs, 1) if c]
        return " + ".join(parts) if parts else "0"


def default_dim(k: int) -> int:
    """Working dimension for order ``k``; no Frenet truncation below it."""
    return 2 * k + 2


def inner(v: FrameField, w: FrameField) -> DiffPoly:
    """``<V, W> = sum c_i d_i`` in the orthonormal frame."""
    v._check(w)
    total = DiffPoly()
    for a, b in zip(v.coeffs, w.coeffs):
        total = total + a * b
    return total


def connection_matrix(n: int) -> list[list[DiffPoly]]:
    """``A`` with ``nabla e_i = sum_j A[j][i] e_j`` (0-based lists)."""
    a = [[DiffPoly()] * n for _ in range(n)]
    for i in range(n - 1):
        a[i + 1][i] = kappa(i + 1)
        a[i][i + 1] = -kappa(i + 1)
    return a


def tension(n: int) -> FrameField:
    """Tension field ``kappa_1 e_2`` of a unit-speed curve in dimension n."""
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    return FrameField.basis(n, 2, kappa(1))


def covariant_derivative(v: FrameField, reduce: Reducer | None = None) -> FrameField:
    """``nabla_{gamma'} V`` by the Leibniz rule over the Frenet equations.

    ``reduce``, if given, is applied to every output coefficient. It must
    commute with differentiation on its image (e.g. constancy/zero rules).
    """
    n = v.dim
    out = [c.differentiate() for c in v.coeffs]
    for j, c in enumerate(v.coeffs):
        if not c:
            continue
        # nabla e_{j+1} = -kappa_j e_j + kappa_{j+1} e_{j+2}
        if j > 0:
            out[j - 1] = out[j - 1] - kappa(j) * c
        if j < n - 1:
            out[j + 1] = out[j + 1] + kappa(j + 1) * c
    if reduce is not None:
        out = [reduce(c) for c in out]
    return FrameField(n, tuple(out))


def nabla_nabla(v: FrameField, reduce: Reducer | None = None) -> FrameField:
    return covariant_derivative(covariant_derivative(v, reduce), reduce)


def nabla_nabla_power(j: int, n: int, reduce: Reducer | None = None) -> list[FrameField]:
    """``[(nabla nabla)^i tau for i in 0..j]`` in dimension n."""
    if j < 0:
        raise ValueError("power must be non-negative")
    t = tension(n)
    if reduce is not None:
        t = t.map(reduce)
    out = [t]
    for _ in range(j):
        out.append(nabla_nabla(out[-1], reduce))
    return out


def rough_laplacian(v: FrameField) -> FrameField:
    return -nabla_nabla(v)


def curvature_operator(v: FrameField) -> FrameField:
    """``K (V - <V, e_1> e_1)``: constant-curvature ``R(V, gamma') gamma'``."""
    k = DiffPoly.symbol(K)
    return FrameField(v.dim, (DiffPoly(),) + tuple(k * c for c in v.coeffs[1:]))


def tau_k(k: int, n: int, reduce: Reducer | None = None) -> FrameField:
    """k-tension ``Lap^(k-1) tau - R(Lap^(k-2) tau)`` by operator composition."""
    if k < 2:
        raise ValueError(f"k-tension needs k >= 2, got {k}")
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    powers = nabla_nabla_power(k - 1, n, reduce)
    sign = -1 if (k - 1) % 2 else 1
    lap_top = powers[k - 1] * sign
    # Lap^(k-2) tau = (-1)^(k-2) (nabla nabla)^(k-2) tau
    lap_prev = powers[k - 2] * (-sign)
    result = lap_top - curvature_operator(lap_prev)
    if reduce is not None:
        result = result.map(reduce)
    return result


def rough_laplacian_power(v: FrameField, j: int) -> FrameField:
    for _ in range(j):
        v = rough_laplacian(v)
    return v

