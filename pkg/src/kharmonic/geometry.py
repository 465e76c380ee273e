"""Numerical curves in constant-curvature model spaces.

Spaces are realized in an ambient vector space: the sphere ``<p,p> = 1/K``
in Euclidean R^(n+1), the hyperboloid sheet ``<p,p> = 1/K`` (p_0 > 0) in
Lorentzian R^(1,n), and R^n itself. Along the curve the ambient derivative
of a tangent field Y is ``D Y = nabla Y - K <e_1, Y> p`` (Gauss formula), so

    p'   = e_1
    e_1' = kappa_1 e_2 - K p
    e_i' = -kappa_{i-1} e_{i-1} + kappa_i e_{i+1}

is integrated with classical fixed-step RK4 and periodic modified
Gram-Schmidt re-orthonormalization under the ambient form.
"""
from __future__ import annotations

import configparser
import csv
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, Sequence

import numpy as np

from .frenet import FrameField, tau_k

__all__ = [
    "ModelSpace",
    "CurvatureProfile",
    "ConstantProfile",
    "PolynomialProfile",
    "SinusoidProfile",
    "FunctionProfile",
    "CurveState",
    "CurveTrace",
    "ConstraintViolation",
    "MissingDerivativeError",
    "make_model_space",
    "integrate_frenet",
    "reorthonormalize",
    "evaluate_frame_field",
    "evaluate_along",
    "numeric_covariant_derivative",
    "covariant_derivative_series",
    "numeric_residual",
    "orthonormality_drift",
    "state_drift",
    "write_trace_csv",
    "trace_columns",
    "load_profile",
    "profile_from_config",
]

logger = logging.getLogger(__name__)


class ConstraintViolation(RuntimeError):
    """Integration drifted past the hard limit; ``t_last_good`` is the last accepted time."""

    def __init__(self, message: str, t_last_good: float):
        super().__init__(message)
        self.t_last_good = t_last_good


class MissingDerivativeError(ValueError):
    """A profile cannot supply a requested derivative order."""

    def __init__(self, index: int, order: int, available: int):
        super().__init__(
            f"kappa_{index} needs derivative order {order}, profile supplies up to {available}"
        )
        self.index = index
        self.order = order
        self.available = available


# model spaces ---------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpace:
    kind: str
    K: float
    dim: int

    @property
    def ambient_dim(self) -> int:
        return self.dim if self.kind == "euclidean" else self.dim + 1

    @property
    def form(self) -> np.ndarray:
        """Diagonal of the ambient bilinear form."""
        d = np.ones(self.ambient_dim)
        if self.kind == "hyperbolic":
            d[0] = -1.0
        return d

    def inner(self, u, v):
        return np.sum(np.asarray(u) * self.form * np.asarray(v), axis=-1)

    def norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    @property
    def radius_sq(self) -> float | None:
        """Value of ``<p, p>`` on the space, None for Euclidean space."""
        return None if self.kind == "euclidean" else 1.0 / self.K

    def base_state(self, t: float = 0.0) -> "CurveState":
        """Canonical start: p along the first ambient axis, frame along the rest."""
        a = self.ambient_dim
        eye = np.eye(a)
        if self.kind == "euclidean":
            return CurveState(t, np.zeros(a), eye[: self.dim].copy())
        p = eye[0] / np.sqrt(abs(self.K))
        return CurveState(t, p, eye[1:].copy())


def make_model_space(K: float, n: int) -> ModelSpace:
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    K = float(K)
    if not np.isfinite(K):
        raise ValueError("curvature constant must be finite")
    kind = "sphere" if K > 0 else "hyperbolic" if K < 0 else "euclidean"
    return ModelSpace(kind, K, n)


# curvature profiles ---------------------------------------------------------

@dataclass(frozen=True)
class ConstantProfile:
    value: float
    max_order: int | None = None

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.value if order == 0 else 0.0)


@dataclass(frozen=True)
class PolynomialProfile:
    """``sum c_j t^j`` with coefficients in increasing degree."""

    coefficients: tuple
    max_order: int | None = None

    def __call__(self, t, order: int = 0):
        poly = np.polynomial.Polynomial(self.coefficients)
        return poly.deriv(order)(np.asarray(t, dtype=float)) if order else poly(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SinusoidProfile:
    """``offset + amplitude * sin(frequency * t + phase)``."""

    offset: float = 0.0
    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    max_order: int | None = None

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        val = self.amplitude * self.frequency**order * np.sin(self.frequency * t + self.phase + order * np.pi / 2)
        return val + self.offset if order == 0 else val


@dataclass(frozen=True)
class FunctionProfile:
    """Arbitrary callable with optional analytic derivatives.

    Orders beyond ``derivatives`` fall back to central differences of
    step ``fd_step`` up to ``fd_max_order`` (error O(fd_step^2), and roundoff
    growing like eps / fd_step^order). ``fd_max_order=0`` disables the fallback.
    """

    func: Callable
    derivatives: tuple = ()
    fd_step: float = 1e-2
    fd_max_order: int = 4

    @property
    def max_order(self) -> int:
        return max(len(self.derivatives), self.fd_max_order)

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        if order == 0:
            return np.asarray(self.func(t), dtype=float) + 0.0 * t
        if order <= len(self.derivatives):
            return np.asarray(self.derivatives[order - 1](t), dtype=float) + 0.0 * t
        h = self.fd_step
        total = 0.0
        for j in range(order + 1):
            total = total + (-1) ** j * comb(order, j) * np.asarray(self.func(t + (order / 2 - j) * h))
        return total / h**order


@dataclass(frozen=True)
class CurvatureProfile:
    """``components[i-1]`` gives kappa_i; indices past the end are identically zero."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def constant(cls, *values: float) -> "CurvatureProfile":
        return cls(tuple(ConstantProfile(float(v)) for v in values))

    def __len__(self) -> int:
        return len(self.components)

    def max_order(self, index: int) -> int | None:
        if index > len(self.components):
            return None
        return self.components[index - 1].max_order

    def value(self, index: int, order: int, t):
        t = np.asarray(t, dtype=float)
        if index > len(self.components):
            return np.zeros_like(t)
        comp = self.components[index - 1]
        available = comp.max_order
        if available is not None and order > available:
            raise MissingDerivativeError(index, order, available)
        return comp(t, order)

    def check_orders(self, required: int) -> None:
        """Raise MissingDerivativeError unless every kappa has ``required`` derivatives."""
        for i, comp in enumerate(self.components, 1):
            if comp.max_order is not None and comp.max_order < required:
                raise MissingDerivativeError(i, required, comp.max_order)


def profile_from_config(text: str) -> CurvatureProfile:
    """Profile from INI text with one ``[kappaN]`` section per curvature.

    Keys: ``kind`` (constant | polynomial | sinusoid), its parameters
    (``value``; ``coefficients``; ``offset, amplitude, frequency, phase``) and
    an optional ``max_order`` capping the available derivatives.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    found = {}
    for name in cp.sections():
        if not name.startswith("kappa") or not name[5:].isdigit():
            raise ValueError(f"unexpected profile section [{name}]")
        sec = cp[name]
        max_order = sec.getint("max_order", fallback=None)
        kind = sec.get("kind", "constant")
        if kind == "constant":
            comp = ConstantProfile(sec.getfloat("value"), max_order)
        elif kind == "polynomial":
            coeffs = tuple(float(c) for c in sec["coefficients"].replace(",", " ").split())
            comp = PolynomialProfile(coeffs, max_order)
        elif kind == "sinusoid":
            comp = SinusoidProfile(
                sec.getfloat("offset", 0.0),
                sec.getfloat("amplitude", 1.0),
                sec.getfloat("frequency", 1.0),
                sec.getfloat("phase", 0.0),
                max_order,
            )
        else:
            raise ValueError(f"unknown profile kind {kind!r} in [{name}]")
        found[int(name[5:])] = comp
    if not found:
        return CurvatureProfile(())
    top = max(found)
    return CurvatureProfile(tuple(found.get(i, ConstantProfile(0.0)) for i in range(1, top + 1)))


def load_profile(path) -> CurvatureProfile:
    with open(path, encoding="utf-8") as fh:
        return profile_from_config(fh.read())


# states and traces ------------------------------------------------------------

@dataclass
class CurveState:
    t: float
    p: np.ndarray
    frame: np.ndarray  # (n, ambient), row i is e_{i+1}


def state_drift(space: ModelSpace, p: np.ndarray, frame: np.ndarray) -> float:
    """Orthonormality defect plus position-constraint and tangency defects."""
    gram = (frame * space.form) @ frame.T
    dev = float(np.max(np.abs(gram - np.eye(len(frame)))))
    if space.radius_sq is not None:
        dev += abs(float(space.inner(p, p)) - space.radius_sq)
        dev += float(np.max(np.abs(space.inner(frame, p))))
    return dev


def reorthonormalize(space: ModelSpace, p: np.ndarray, frame: np.ndarray):
    """Project p onto the space and modified-Gram-Schmidt the frame tangent to it."""
    p = np.array(p, dtype=float)
    frame = np.array(frame, dtype=float)
    if space.radius_sq is not None:
        p = p * np.sqrt(space.radius_sq / space.inner(p, p))
        pp = space.inner(p, p)
    for i in range(len(frame)):
        e = frame[i]
        if space.radius_sq is not None:
            e = e - space.inner(e, p) / pp * p
        for j in range(i):
            e = e - space.inner(e, frame[j]) * frame[j]
        frame[i] = e / np.sqrt(space.inner(e, e))
    return p, frame


@dataclass
class CurveTrace:
    t: np.ndarray  # (N,)
    p: np.ndarray  # (N, ambient)
    frame: np.ndarray  # (N, n, ambient)
    space: ModelSpace
    profile: CurvatureProfile
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> CurveState:
        return CurveState(float(self.t[i]), self.p[i], self.frame[i])

    @property
    def states(self) -> list[CurveState]:
        return [self[i] for i in range(len(self))]

    @property
    def h(self) -> float:
        return float(self.meta["step"])


def _system_matrix(space: ModelSpace, profile: CurvatureProfile, t: float) -> np.ndarray:
    n = space.dim
    a = np.zeros((n + 1, n + 1))
    a[0, 1] = 1.0
    a[1, 0] = -space.K
    for i in range(1, n):
        k = float(profile.value(i, 0, t))
        a[i, i + 1] = k
        a[i + 1, i] = -k
    return a


def integrate_frenet(
    space: ModelSpace,
    profile: CurvatureProfile,
    init: CurveState | None = None,
    t_end: float = 1.0,
    h: float = 1e-3,
    reorth_every: int = 100,
    drift_limit: float = 1e-6,
    init_tol: float = 1e-12,
) -> CurveTrace:
    """RK4 integration of position and Frenet frame from ``init.t`` to ``t_end``.

    The step is adjusted to ``(t_end - t0) / round((t_end - t0) / h)`` so the
    grid is uniform and lands on ``t_end``. Drift is measured every step
    before any correction; exceeding ``drift_limit`` raises ConstraintViolation.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    if len(profile) > space.dim - 1:
        raise ValueError(f"profile has {len(profile)} curvatures, dimension {space.dim} allows {space.dim - 1}")
    init = space.base_state() if init is None else init
    t0 = float(init.t)
    if not t_end > t0:
        raise ValueError("t_end must exceed the initial time")
    p0 = np.asarray(init.p, dtype=float)
    f0 = np.asarray(init.frame, dtype=float)
    if f0.shape != (space.dim, space.ambient_dim) or p0.shape != (space.ambient_dim,):
        raise ValueError("initial state shape does not match the model space")
    d0 = state_drift(space, p0, f0)
    if d0 > init_tol:
        raise ValueError(f"initial state violates the constraints by {d0:.3e}")

    steps = max(1, int(round((t_end - t0) / h)))
    h_eff = (t_end - t0) / steps
    x = np.vstack([p0, f0])
    ts = t0 + h_eff * np.arange(steps + 1)
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    max_drift = d0
    reorth_count = 0
    for s in range(steps):
        t = ts[s]
        a1 = _system_matrix(space, profile, t)
        a2 = _system_matrix(space, profile, t + h_eff / 2)
        a3 = _system_matrix(space, profile, t + h_eff)
        k1 = a1 @ x
        k2 = a2 @ (x + h_eff / 2 * k1)
        k3 = a2 @ (x + h_eff / 2 * k2)
        k4 = a3 @ (x + h_eff * k3)
        x = x + h_eff / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = state_drift(space, x[0], x[1:])
        if drift > drift_limit:
            raise ConstraintViolation(
                f"constraint drift {drift:.3e} exceeds {drift_limit:.1e} at t={ts[s + 1]:.6g}",
                float(t),
            )
        max_drift = max(max_drift, drift)
        if reorth_every and (s + 1) % reorth_every == 0:
            p, fr = reorthonormalize(space, x[0], x[1:])
            x = np.vstack([p, fr])
            reorth_count += 1
        out[s + 1] = x
    logger.debug("integrated %d steps, max drift %.3e", steps, max_drift)
    meta = {
        "step": float(h_eff),
        "requested_step": float(h),
        "steps": steps,
        "reorth_every": reorth_every,
        "reorthonormalizations": reorth_count,
        "max_drift": float(max_drift),
    }
    return CurveTrace(ts, out[:, 0].copy(), out[:, 1:].copy(), space, profile, meta)


# symbolic fields, numerically -----------------------------------------------------

def _symbol_values(v: FrameField, profile: CurvatureProfile, t) -> dict:
    values = {}
    for sym in set().union(*(c.symbols() for c in v.coeffs)):
        values[sym] = profile.value(sym.index, sym.order, t)
    return values


def _coefficients(v: FrameField, profile: CurvatureProfile, t, k_value: float) -> np.ndarray:
    values = _symbol_values(v, profile, t)
    t = np.asarray(t, dtype=float)
    return np.stack([np.broadcast_to(np.asarray(c.evaluate(values, k_value), dtype=float), t.shape) for c in v.coeffs])


def evaluate_frame_field(
    v: FrameField, profile: CurvatureProfile, state: CurveState, space: ModelSpace | None = None
) -> np.ndarray:
    """Ambient vector ``sum c_i(t) e_i`` at one state.

    ``space`` supplies K and is required when a coefficient contains K.
    """
    if v.dim != len(state.frame):
        raise ValueError(f"field dimension {v.dim} does not match frame size {len(state.frame)}")
    if space is None and any(c.has_k() for c in v.coeffs):
        raise ValueError("field depends on K; pass the model space")
    k_value = 0.0 if space is None else space.K
    c = _coefficients(v, profile, np.asarray(state.t, dtype=float), k_value)
    return c @ np.asarray(state.frame)


def evaluate_along(v: FrameField, trace: CurveTrace) -> np.ndarray:
    """``evaluate_frame_field`` at every sample, shape ``(N, ambient)``."""
    if v.dim != trace.space.dim:
        raise ValueError(f"field dimension {v.dim} does not match space dimension {trace.space.dim}")
    c = _coefficients(v, trace.profile, trace.t, trace.space.K)  # (n, N)
    return np.einsum("iN,Nia->Na", c, trace.frame)


def numeric_covariant_derivative(trace: CurveTrace, samples, i: int, h: float | None = None) -> np.ndarray:
    """Central-difference ``nabla_{gamma'} Y`` at interior sample ``i``."""
    samples = np.asarray(samples)
    if not 0 < i < len(trace) - 1:
        raise IndexError(f"sample {i} is not interior to a trace of length {len(trace)}")
    h = trace.h if h is None else h
    space = trace.space
    d = (samples[i + 1] - samples[i - 1]) / (2 * h)
    if space.K:
        d = d + space.K * space.inner(trace.frame[i, 0], samples[i]) * trace.p[i]
    return d


def covariant_derivative_series(trace: CurveTrace, samples) -> np.ndarray:
    """Numeric ``nabla Y`` at all samples; NaN where a neighbour is missing."""
    samples = np.asarray(samples, dtype=float)
    out = np.full_like(samples, np.nan)
    h = trace.h
    out[1:-1] = (samples[2:] - samples[:-2]) / (2 * h)
    if trace.space.K:
        proj = trace.space.inner(trace.frame[1:-1, 0], samples[1:-1])
        out[1:-1] += trace.space.K * proj[:, None] * trace.p[1:-1]
    return out


@lru_cache(maxsize=32)
def _tau_k_cached(k: int, n: int) -> FrameField:
    return tau_k(k, n)


def numeric_residual(trace: CurveTrace, k: int, interior: bool = True) -> np.ndarray:
    """Norm of the evaluated k-tension at each (interior) sample."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    trace.profile.check_orders(2 * k - 2)
    vec = evaluate_along(_tau_k_cached(k, trace.space.dim), trace)
    res = trace.space.norm(vec)
    return res[1:-1] if interior else res


def orthonormality_drift(trace) -> float:
    """Maximum constraint defect over a trace (or a single CurveState with a space)."""
    if isinstance(trace, tuple):
        space, state = trace
        return state_drift(space, np.asarray(state.p), np.asarray(state.frame))
    return max(state_drift(trace.space, trace.p[i], trace.frame[i]) for i in range(len(trace)))


# CSV ----------------------------------------------------------------------------

def trace_columns(space: ModelSpace, residual_ks: Sequence[int] = ()) -> list[str]:
    """Stable column order: t, p_0.., e1_0.., ..., en_.., residual_k<k>..."""
    a = space.ambient_dim
    cols = ["t"] + [f"p_{c}" for c in range(a)]
    for i in range(1, space.dim + 1):
        cols += [f"e{i}_{c}" for c in range(a)]
    cols += [f"residual_k{k}" for k in residual_ks]
    return cols


def write_trace_csv(trace: CurveTrace, fh, residuals: dict | None = None) -> None:
    """Write ``trace`` to an open text file; residual series span all samples."""
    residuals = residuals or {}
    ks = sorted(residuals)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(trace_columns(trace.space, ks))
    for i in range(len(trace)):
        row = [trace.t[i], *trace.p[i], *trace.frame[i].ravel()]
        row += [residuals[k][i] for k in ks]
        writer.writerow([repr(float(x)) for x in row])
