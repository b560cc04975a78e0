"""Periodic-Dirichlet wave problems u_tt - u_xx = f(x, t, u) on [0, pi] x S^1.

The problem is cast as A u = F'(u) with A = box - b I and F'(u) the
pointwise map u -> f_b(x, t, u) = f(x, t, u) - b u, projected on the
truncated Fourier basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EvaluationError, HypothesisViolation, NoConvergence, ValidationError
from .fourier import TruncationSpec, analyze, mesh, quadrature_weight, synthesize, FourierField
from .index import IndexPair, gap_nondegeneracy_check, index_pair_stable, relative_morse_index
from .operators import (TruncatedOperator, box_spectrum, multiplication_operator, wave_operator)
from .reduction import (CriticalPointReport, NonlinearMap, ReducedProblem, find_critical_points,
                        homotopy_solve, regularized_solve)

PointFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
FieldFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

CONDITIONS = ("f1", "f2", "f2pm", "f3plus", "f3minus", "f4plus", "f4minus")
SWEEP_EXPONENTS = tuple(range(-2, 5))
REFERENCE_EXPONENTS = (-2, -1, 0, 1)
KAPPA = (2 / math.pi) * (math.pi / 3 + math.sqrt(3) / 2)  # max of (2/pi)(atan s + 2s/(1+s^2))


def h_default(u):
    """Lipschitz, sublinear, odd: sign(u) ln(1 + |u|)."""
    return np.sign(u) * np.log1p(np.abs(u))


def h_antiderivative(u):
    a = np.abs(u)
    return (1 + a) * np.log1p(a) - a


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Pointwise right-hand side f(x, t, u) with shift b and claimed Lipschitz bound of f_b.

    ``fields`` holds the comparison coefficients (g1, g2, ginf, g3) as
    functions of (x, t); ``antiderivative`` is an optional closed form of
    F_b(x, t, u) = int_0^u f_b(x, t, s) ds. ``conditions`` lists the tags the
    example is built to satisfy.
    """

    f: PointFn
    b: float
    lipschitz_claimed: float
    name: str = "custom"
    params: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict, repr=False)
    antiderivative: PointFn | None = field(default=None, repr=False)
    conditions: tuple[str, ...] = ("f1",)
    remainder_lipschitz: float | None = None
    odd: bool = False

    def __post_init__(self):
        # l_F < |b| is enforced when the problem is reduced, so that the
        # hypothesis checker can still report a failing (f1)
        if self.b == 0:
            raise ValidationError("b must be nonzero")
        if not (math.isfinite(self.lipschitz_claimed) and self.lipschitz_claimed >= 0):
            raise ValidationError(f"l_F must be finite and >= 0, got {self.lipschitz_claimed!r}")

    def f_b(self, x, t, u):
        return self.f(x, t, u) - self.b * u

    def field_grid(self, name: str, spec: TruncationSpec) -> np.ndarray:
        if name not in self.fields:
            raise ValidationError(f"nonlinearity {self.name!r} has no comparison field {name!r}")
        X, T = mesh(spec)
        return np.broadcast_to(np.asarray(self.fields[name](X, T), dtype=float), X.shape).copy()

    def g0_grid(self, spec: TruncationSpec, delta: float = 1e-7) -> np.ndarray:
        """d f_b / du at u = 0 by a symmetric difference."""
        X, T = mesh(spec)
        return (self.f_b(X, T, np.full_like(X, delta)) - self.f_b(X, T, np.full_like(X, -delta))) / (2 * delta)


def _checked(vals: np.ndarray, X, T, U, what: str) -> np.ndarray:
    bad = ~np.isfinite(vals)
    if bad.any():
        i = tuple(int(v[0]) for v in np.nonzero(bad))
        raise EvaluationError(
            f"non-finite {what} at grid node {i}: x={X[i]:.6g}, t={T[i]:.6g}, u={U[i]:.6g}")
    return vals


def nemytskii_gradient(nl: Nonlinearity, u: FourierField) -> FourierField:
    """L^2 gradient of F: synthesize, apply f_b pointwise, project back."""
    return FourierField(u.spec, _gradient_coeffs(nl, u.spec, u.coeffs))


def _gradient_coeffs(nl: Nonlinearity, spec: TruncationSpec, c: np.ndarray) -> np.ndarray:
    X, T = mesh(spec)
    U = synthesize(spec, c)
    return analyze(spec, _checked(nl.f_b(X, T, U), X, T, U, "f_b"))


def _antiderivative_quadrature(nl: Nonlinearity, X, T, U, rtol: float = 1e-14,
                               max_nodes: int = 1024) -> np.ndarray:
    """F_b(u) = u * int_0^1 f_b(s u) ds by Gauss-Legendre with doubling node counts."""
    prev = None
    n = 8
    while n <= max_nodes:
        s, w = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (s + 1)
        acc = np.zeros_like(U)
        for si, wi in zip(s, w):
            acc += 0.5 * wi * nl.f_b(X, T, si * U)
        val = U * acc
        if prev is not None and np.all(np.abs(val - prev) <= rtol * (1 + np.abs(val)) + 1e-300):
            return val
        prev = val
        n *= 2
    err = float(np.max(np.abs(val - prev)))
    raise EvaluationError(f"antiderivative quadrature did not converge (last change {err:.3g})")


def nemytskii_value(nl: Nonlinearity, u: FourierField) -> float:
    return _value_coeffs(nl, u.spec, u.coeffs)


def _value_coeffs(nl: Nonlinearity, spec: TruncationSpec, c: np.ndarray) -> float:
    X, T = mesh(spec)
    U = synthesize(spec, c)
    if nl.antiderivative is not None:
        vals = nl.antiderivative(X, T, U)
    else:
        vals = _antiderivative_quadrature(nl, X, T, U)
    _checked(vals, X, T, U, "F_b")
    return float(quadrature_weight(spec) * np.sum(vals))


def nonlinear_map(nl: Nonlinearity, spec: TruncationSpec) -> NonlinearMap:
    F = NonlinearMap(lambda c: _gradient_coeffs(nl, spec, c),
                     lambda c: _value_coeffs(nl, spec, c),
                     nl.lipschitz_claimed)
    origin = float(np.linalg.norm(F.apply(np.zeros(spec.n_modes))))
    return NonlinearMap(F.apply, F.value, F.lipschitz_bound, origin)


def _lipschitz_samples(nl: Nonlinearity, sample_count: int, seed: int, u_range: float,
                       period: float) -> tuple[float, dict]:
    # one draw per sample row so a longer run extends a shorter one
    R = np.random.default_rng(seed).random((sample_count, 6))
    top = math.log10(u_range)
    x = math.pi * R[:, 0]
    t = period * R[:, 1]
    u = np.where(R[:, 2] < 0.5, -1.0, 1.0) * 10 ** (-3 + (top + 3) * R[:, 3])
    # increments no smaller than 1e-4 |u| keep cancellation error near 1e-12 relative
    scale = np.maximum(1.0, np.abs(u))
    v = np.where(R[:, 4] < 0.5, -1.0, 1.0) * np.maximum(10 ** (-6 + (top + 6) * R[:, 5]), 1e-4 * scale)
    with np.errstate(all="ignore"):
        qs = np.abs(nl.f_b(x, t, u + v) - nl.f_b(x, t, u)) / np.abs(v)
    qs = np.where(np.isfinite(qs), qs, np.inf)
    i = int(np.argmax(qs))
    return float(qs[i]), {"x": float(x[i]), "t": float(t[i]), "u": float(u[i]), "v": float(v[i])}


def estimate_lipschitz(nl: Nonlinearity, sample_count: int = 10_000, seed: int = 0,
                       u_range: float = 1e4, period: float = 2 * math.pi) -> float:
    """Largest sampled quotient |f_b(u+v) - f_b(u)| / |v| over random (x, t, u, v).

    u and v are drawn log-uniformly in magnitude (up to ``u_range``) with
    random signs, so both small increments and large amplitudes are probed.
    """
    if sample_count < 1:
        raise ValidationError("sample_count must be >= 1")
    return _lipschitz_samples(nl, sample_count, seed, u_range, period)[0]


# ---------------------------------------------------------------- examples

_REQUIRED = {
    "ex_thm41": ("b", "alpha", "beta"),
    "ex_thm42_plus": ("b", "ginf"),
    "ex_thm42_minus": ("b", "ginf"),
    "ex_thm43": ("k",),
    "linear": ("b",),
}
_DEFAULTS = {
    "ex_thm41": {"eps1": 0.1, "eps2": 0.05, "forcing": 0.0},
    "ex_thm42_plus": {"eps": 0.01, "forcing": 0.0},
    "ex_thm42_minus": {"eps": 0.01, "forcing": 0.0},
    "ex_thm43": {"alpha": 0.8, "beta": 0.9, "eps1": 1.0, "eps2": 0.02, "g3": 0.25},
    "linear": {"g_mean": 0.2, "g_amp": 0.1, "h1": 1.0, "h2": 0.5},
}
EXAMPLES = tuple(_REQUIRED)


def positive_box_eigenvalue(k: int, p: int, q: int) -> float:
    """k-th smallest positive eigenvalue of the wave operator (lambda_1 < lambda_2 < ...)."""
    hi = 2.0 * k + 2
    while True:
        vals = [v for v in box_spectrum(p, q, 0, hi) if v > 0]
        if len(vals) >= k:
            return float(vals[k - 1])
        hi *= 2


def example_nonlinearity(name: str, params: dict | None = None, p: int = 1, q: int = 1) -> Nonlinearity:
    """Build one of the shipped example nonlinearities.

    ex_thm41:   f = b u + g(x,t,u) u + eps2 h(u) + forcing sin x, with
                g = (beta-alpha)/2 sin(eps1 ln(|x|+|t|+|u|+1)) + (alpha+beta)/2.
    ex_thm42_*: f = b u + ginf u +- eps atan(u) + forcing sin x.
    ex_thm43:   f = g(x,t,u) u + eps2 h(u), b = lambda_k / 2, with
                g = g0 + (lambda_k - g0 - eps1)(2/pi) atan(eps1 u^2) and
                g0 = (alpha+beta)/2 + (beta-alpha)/2 cos(2x) cos(w t) in [alpha, beta].
    linear:     f = b u + g(x,t) u + h(x,t), g = g_mean + g_amp cos(2x) cos(w t),
                h = h1 sin x + h2 sin(2x) sin(w t).

    h(u) = sign(u) ln(1 + |u|) throughout; (p, q) fixes w = p/q and lambda_k.
    """
    if name not in _REQUIRED:
        raise ValidationError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    params = dict(params or {})
    missing = [k for k in _REQUIRED[name] if k not in params]
    if missing:
        raise ValidationError(f"{name} requires parameters {list(_REQUIRED[name])}; missing {missing}")
    allowed = set(_REQUIRED[name]) | set(_DEFAULTS[name])
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ValidationError(f"{name} does not take parameters {unknown}; allowed {sorted(allowed)}")
    P = {**_DEFAULTS[name], **params}
    w = p / q
    return _BUILDERS[name](P, w, p, q)


def _ex_thm41(P, w, p, q):
    b, al, be, e1, e2, h0 = (float(P[k]) for k in ("b", "alpha", "beta", "eps1", "eps2", "forcing"))
    if not -abs(b) < al <= be < abs(b):
        raise ValidationError("need -|b| < alpha <= beta < |b|")
    half, mid = (be - al) / 2, (al + be) / 2

    def g(x, t, u):
        return half * np.sin(e1 * np.log(np.abs(x) + np.abs(t) + np.abs(u) + 1)) + mid

    def f(x, t, u):
        return b * u + g(x, t, u) * u + e2 * h_default(u) + h0 * np.sin(x)

    # d(g u)/du = g + u g_u with |u g_u| <= eps1 (beta-alpha)/2, and 0 <= h' <= 1
    lip = max(abs(al - e1 * half), abs(be + e1 * half + e2), abs(al - e1 * half + e2), abs(be + e1 * half))
    return Nonlinearity(f, b, lip, "ex_thm41", P,
                        {"g1": lambda x, t: al + 0 * x, "g2": lambda x, t: be + 0 * x},
                        conditions=("f1", "f2"), odd=(h0 == 0))


def _ex_thm42(sign):
    def build(P, w, p, q):
        b, ginf, eps, h0 = (float(P[k]) for k in ("b", "ginf", "eps", "forcing"))
        if not abs(ginf) < abs(b):
            raise ValidationError("need |ginf| < |b|")

        def f(x, t, u):
            return b * u + ginf * u + sign * eps * np.arctan(u) + h0 * np.sin(x)

        def Fb(x, t, u):
            return (0.5 * ginf * u * u + sign * eps * (u * np.arctan(u) - 0.5 * np.log1p(u * u))
                    + h0 * np.sin(x) * u)

        tag = "plus" if sign > 0 else "minus"
        return Nonlinearity(f, b, abs(ginf) + eps, f"ex_thm42_{tag}", {**P, "sign": sign},
                            {"ginf": lambda x, t: ginf + 0 * x}, Fb,
                            conditions=("f1", "f2pm"), remainder_lipschitz=eps, odd=(h0 == 0))
    return build


def _ex_thm43(P, w, p, q):
    k = int(P["k"])
    if k < 2:
        raise ValidationError("k must be >= 2")
    al, be, e1, e2, g3 = (float(P[n]) for n in ("alpha", "beta", "eps1", "eps2", "g3"))
    lam = positive_box_eigenvalue(k, p, q)
    b = lam / 2
    if not 0 < al <= be < lam:
        raise ValidationError(f"need 0 < alpha <= beta < lambda_k = {lam:g}")
    if not 0 < e1 < lam - be:
        raise ValidationError(f"need 0 < eps1 < lambda_k - beta = {lam - be:g}")
    half, mid = (be - al) / 2, (al + be) / 2

    def g0(x, t):
        return mid + half * np.cos(2 * x) * np.cos(w * t)

    def f(x, t, u):
        g0v = g0(x, t)
        g = g0v + (lam - g0v - e1) * (2 / math.pi) * np.arctan(e1 * u * u)
        return g * u + e2 * h_default(u)

    def Fb(x, t, u):
        g0v = g0(x, t)
        v = u * u
        inner = 0.5 * (v * np.arctan(e1 * v) - np.log1p((e1 * v) ** 2) / (2 * e1))
        return (0.5 * (g0v - b) * v + (lam - g0v - e1) * (2 / math.pi) * inner
                + e2 * h_antiderivative(u))

    # f_b' ranges over [alpha - b, alpha (1 - kappa) + (lambda_k - eps1) kappa - b + eps2]
    lip = max(abs(al - b), abs(al * (1 - KAPPA) + (lam - e1) * KAPPA - b + e2))
    return Nonlinearity(f, b, lip, "ex_thm43", {**P, "lambda_k": lam, "b": b},
                        {"g3": lambda x, t: g3 + 0 * x, "g0_example": g0}, Fb,
                        conditions=("f1", "f3plus", "f4plus"), odd=True)


def _linear(P, w, p, q):
    b, gm, ga, h1, h2 = (float(P[k]) for k in ("b", "g_mean", "g_amp", "h1", "h2"))

    def g(x, t):
        return gm + ga * np.cos(2 * x) * np.cos(w * t)

    def h(x, t):
        return h1 * np.sin(x) + h2 * np.sin(2 * x) * np.sin(w * t)

    def f(x, t, u):
        return b * u + g(x, t) * u + h(x, t)

    def Fb(x, t, u):
        return 0.5 * g(x, t) * u * u + h(x, t) * u

    return Nonlinearity(f, b, abs(gm) + abs(ga), "linear", P, {"g": g, "h": h, "g1": g, "g2": g}, Fb,
                        conditions=("f1",), odd=(h1 == 0 and h2 == 0))


_BUILDERS = {
    "ex_thm41": _ex_thm41,
    "ex_thm42_plus": _ex_thm42(+1),
    "ex_thm42_minus": _ex_thm42(-1),
    "ex_thm43": _ex_thm43,
    "linear": _linear,
}


# ---------------------------------------------------------------- problems

@dataclass(frozen=True, eq=False)
class WaveProblem:
    """A = box - b I on the truncation; the reduction is built on first use."""

    spec: TruncationSpec
    nonlinearity: Nonlinearity
    A: TruncatedOperator
    l: float | None = None

    @classmethod
    def build(cls, spec: TruncationSpec, nl: Nonlinearity, l: float | None = None) -> "WaveProblem":
        return cls(spec, nl, wave_operator(spec).shift(-nl.b), l)

    @cached_property
    def reduced(self) -> ReducedProblem:
        return ReducedProblem.build(self.A, nonlinear_map(self.nonlinearity, self.spec), self.l,
                                    gap_radius=abs(self.nonlinearity.b))

    def operator(self, spec: TruncationSpec | None = None) -> TruncatedOperator:
        spec = spec or self.spec
        return self.A if spec == self.spec else wave_operator(spec).shift(-self.nonlinearity.b)

    def multiplication(self, name: str, spec: TruncationSpec | None = None) -> TruncatedOperator:
        spec = spec or self.spec
        g = self.nonlinearity.g0_grid(spec) if name == "g0" else self.nonlinearity.field_grid(name, spec)
        return multiplication_operator(g, spec)

    def index_pair(self, name: str, kernel_tol: float = 1e-8) -> IndexPair:
        """(i_A(g), nu_A(g)) for a comparison field, with a (J+2, K+2) stability check."""
        return index_pair_stable(lambda s: (self.operator(s), self.multiplication(name, s)),
                                 self.spec, kernel_tol)

    def residual(self, u: np.ndarray) -> float:
        """||box u - f(u)|| on the truncation."""
        return float(np.linalg.norm(self.A.matrix @ u - _gradient_coeffs(self.nonlinearity, self.spec, u)))

    def fine_residual(self, u: np.ndarray, factor: int = 2) -> float:
        """Residual with the nonlinearity evaluated on a ``factor``-times denser grid."""
        fine = self.spec.fine(factor)
        return float(np.linalg.norm(self.A.matrix @ u - _gradient_coeffs(self.nonlinearity, fine, u)))


@dataclass(frozen=True)
class HypothesisReport:
    condition: str
    holds: bool
    evidence: dict
    seed: int

    def to_dict(self) -> dict:
        return {"condition": self.condition, "holds": self.holds, "evidence": self.evidence,
                "seed": self.seed}


def _sweep(spec: TruncationSpec, exponents: Iterable[int]):
    X, T = mesh(spec)
    mags = [10.0 ** m for m in exponents]
    return X, T, [(s * m, m) for m in mags for s in (1.0, -1.0)]


def _pair_evidence(pair: IndexPair) -> dict:
    return {"index": pair.index, "nullity": pair.nullity, "stable": pair.stable,
            "ill_conditioned": pair.ill_conditioned}


def _check_f1(prob: WaveProblem, seed, sample_count, exponents):
    nl = prob.nonlinearity
    est, wit = _lipschitz_samples(nl, sample_count, seed, 1e4, prob.spec.period)
    X, T, us = _sweep(prob.spec, exponents)
    for u, _ in us:
        for v in (1e-6 * max(1.0, abs(u)), -u, u):
            q = np.abs(nl.f_b(X, T, np.full_like(X, u + v)) - nl.f_b(X, T, np.full_like(X, u))) / abs(v)
            i = np.unravel_index(int(np.argmax(q)), q.shape)
            if q[i] > est:
                est, wit = float(q[i]), {"x": float(X[i]), "t": float(T[i]), "u": u, "v": v}
    holds = est <= nl.lipschitz_claimed + 1e-9 and nl.lipschitz_claimed < abs(nl.b)
    return holds, {"lipschitz_estimate": est, "lipschitz_claimed": nl.lipschitz_claimed,
                   "b": nl.b, "estimate_exceeds_b": est >= abs(nl.b),
                   "witness": wit, "samples": sample_count}


def _check_f2(prob: WaveProblem, seed, sample_count, exponents, tail_tol=0.05):
    nl = prob.nonlinearity
    p1, p2 = prob.index_pair("g1"), prob.index_pair("g2")
    g1, g2 = nl.field_grid("g1", prob.spec), nl.field_grid("g2", prob.spec)
    X, T, us = _sweep(prob.spec, exponents)
    tail = {}
    ok_tail = True
    for u, m in us:
        q = nl.f_b(X, T, np.full_like(X, u)) / u
        excess = float(np.max(np.maximum(0.0, np.maximum(g1 - q, q - g2))))
        tail[f"{u:g}"] = excess
        if m >= 100 and excess > tail_tol:
            ok_tail = False
    ordered = bool(np.all(g1 <= g2))
    holds = (ordered and p1.index == p2.index and p2.nullity == 0 and ok_tail)
    return holds, {"i_A(g1)": _pair_evidence(p1), "i_A(g2)": _pair_evidence(p2),
                   "g1<=g2": ordered, "quotient_excess": tail, "tail_tol": tail_tol}


def _check_f2pm(prob: WaveProblem, seed, sample_count, exponents, m2=10.0, m1_max=10.0):
    nl = prob.nonlinearity
    sign = nl.params.get("sign")
    if sign not in (1, -1):
        raise ValidationError("f2pm check needs a 'sign' parameter of +1 or -1")
    ginf = nl.field_grid("ginf", prob.spec)
    X, T, us = _sweep(prob.spec, exponents)
    sup_r, margin = 0.0, np.inf
    for u, m in us:
        r = nl.f_b(X, T, np.full_like(X, u)) - ginf * u
        sup_r = max(sup_r, float(np.max(np.abs(r))))
        if m >= m2:
            margin = min(margin, float(np.min(sign * r * np.sign(u))))
    pair = prob.index_pair("ginf")
    holds = sup_r <= m1_max and margin > 0
    return holds, {"sign": sign, "M1": sup_r, "M1_max": m1_max, "M2": m2, "c": margin,
                   "i_A(ginf)": _pair_evidence(pair)}


def _check_f3(prob: WaveProblem, sign: int, seed, sample_count, exponents):
    nl = prob.nonlinearity
    g3 = nl.field_grid("g3", prob.spec)
    w = (sign * prob.A).eigenvalues
    below = w[w < nl.lipschitz_claimed]
    thresh = float(below.max()) if below.size else -np.inf
    above = bool(np.all(sign * g3 > thresh))

    def D(u):
        U = np.full_like(g3, u)
        Fb = (nl.antiderivative(X, T, U) if nl.antiderivative is not None
              else _antiderivative_quadrature(nl, X, T, U))
        return sign * Fb - 0.5 * g3 * u * u

    X, T, us = _sweep(prob.spec, exponents)
    ref = np.min([D(s * 10.0 ** m) for m in REFERENCE_EXPONENTS for s in (1.0, -1.0)], axis=0)
    c = float(np.min(ref))
    coercive = True
    for u, m in us:
        d = D(u)
        c = min(c, float(np.min(d)))
        if m >= 100 and np.any(d < ref - 1e-9):
            coercive = False
    return above and coercive, {"max_sigma_below_lF": thresh, "g3_margin": float(np.min(sign * g3) - thresh),
                                "c": c, "tail_above_reference": coercive}


def _check_f4(prob: WaveProblem, sign: int, seed, sample_count, exponents):
    nl = prob.nonlinearity
    X, T = mesh(prob.spec)
    f0 = float(np.max(np.abs(nl.f(X, T, np.zeros_like(X)))))
    p0, p3 = prob.index_pair("g0"), prob.index_pair("g3")
    lhs = sign * (p0.index + p0.nullity)
    holds = f0 == 0.0 and lhs < sign * p3.index
    return holds, {"i_A(g0)": _pair_evidence(p0), "i_A(g3)": _pair_evidence(p3),
                   "nu_A(g0)": p0.nullity, "max|f(x,t,0)|": f0,
                   "g0_evaluated_at": "u=0 (symmetric difference)"}


def check_hypotheses(prob: WaveProblem, which: Iterable[str] | None = None, seed: int = 0,
                     sample_count: int = 20_000,
                     exponents: Sequence[int] = SWEEP_EXPONENTS) -> list[HypothesisReport]:
    """Evaluate the requested conditions (default: those the nonlinearity claims).

    Pointwise conditions are checked on the sweep u in {+-10^m} at every
    grid node; each sample passes or fails on its own, so enlarging the
    sweep can only add failure witnesses.
    """
    which = list(prob.nonlinearity.conditions if which is None else which)
    bad = [c for c in which if c not in CONDITIONS]
    if bad:
        raise ValidationError(f"unknown conditions {bad}; choose from {CONDITIONS}")
    exponents = tuple(exponents)
    out = []
    for c in which:
        if c == "f1":
            holds, ev = _check_f1(prob, seed, sample_count, exponents)
        elif c == "f2":
            holds, ev = _check_f2(prob, seed, sample_count, exponents)
        elif c == "f2pm":
            holds, ev = _check_f2pm(prob, seed, sample_count, exponents)
        elif c in ("f3plus", "f3minus"):
            holds, ev = _check_f3(prob, 1 if c == "f3plus" else -1, seed, sample_count, exponents)
        else:
            holds, ev = _check_f4(prob, 1 if c == "f4plus" else -1, seed, sample_count, exponents)
        out.append(HypothesisReport(c, bool(holds), ev, seed))
    return out


# ---------------------------------------------------------------- solving

METHOD_CONDITIONS = {"reduce_direct": ("f1",), "homotopy": ("f1", "f2"), "regularized": ("f1", "f2pm")}


@dataclass(frozen=True, eq=False)
class WaveSolveResult:
    method: str
    solutions: list[CriticalPointReport]
    residuals: list[float]
    fine_residuals: list[float]
    hypotheses: list[HypothesisReport]
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        sols = []
        for s, r, fr in zip(self.solutions, self.residuals, self.fine_residuals):
            d = s.to_dict()
            d["wave_residual"] = r
            d["fine_grid_residual"] = fr
            sols.append(d)
        return {"method": self.method, "solutions": sols,
                "hypotheses": [h.to_dict() for h in self.hypotheses], "details": self.details}


def solve_wave(prob: WaveProblem, method: str = "reduce_direct", budget: int = 4000, seed: int = 0,
               force: bool = False, strategy: str | None = None,
               eps_sequence: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
               lambda_grid: Sequence[float] | None = None,
               hypotheses: list[HypothesisReport] | None = None) -> WaveSolveResult:
    """Solve the truncated wave problem and certify each solution by its residual.

    Conditions required by ``method`` (plus the coercivity/index conditions
    the nonlinearity claims, for ``reduce_direct``) are checked first; a
    failure raises HypothesisViolation unless ``force`` is set.
    """
    if method not in METHOD_CONDITIONS:
        raise ValidationError(f"unknown method {method!r}; choose from {sorted(METHOD_CONDITIONS)}")
    nl = prob.nonlinearity
    needed = list(METHOD_CONDITIONS[method])
    if method == "reduce_direct":
        needed += [c for c in nl.conditions if c.startswith(("f3", "f4"))]
    if hypotheses is None:
        hypotheses = check_hypotheses(prob, needed, seed)
    failed = [h for h in hypotheses if h.condition in needed and not h.holds]
    if failed and not force:
        h = failed[0]
        raise HypothesisViolation(h.condition, f"condition {h.condition} fails for {nl.name}", h.evidence)

    details: dict = {"l": prob.reduced.l, "l_F": nl.lipschitz_claimed,
                     "dim_H0": prob.reduced.dim0, "forced": bool(failed)}
    if method == "reduce_direct":
        if strategy is None:
            strategy = "maximize" if "f3plus" in nl.conditions else "multistart_newton"
        details["strategy"] = strategy
        sols = find_critical_points(prob.reduced, strategy, budget, seed)
    elif method == "homotopy":
        B1 = prob.multiplication("g1")
        res = homotopy_solve(prob.A, B1, prob.reduced.F, lambda_grid,
                             gap_radius=abs(nl.b), budget=budget)
        details["path"] = res.to_dict()
        sols = [res.final]
    else:
        Binf = prob.multiplication("ginf")
        F = prob.reduced.F
        M = Binf.matrix
        lip_r = nl.remainder_lipschitz if nl.remainder_lipschitz is not None else F.lipschitz_bound + Binf.norm()
        r = NonlinearMap(lambda z: F.apply(z) - M @ z,
                         lambda z: F.value(z) - 0.5 * float(z @ M @ z), lip_r)
        res = regularized_solve(prob.A, Binf, r, eps_sequence, budget=budget, seed=seed)
        details["path"] = res.to_dict()
        if not res.polished:
            raise NoConvergence(f"regularized limit did not converge (kernel norms {res.kernel_norms[0]:.3g}"
                                f" -> {res.kernel_norms[-1]:.3g}, residual {res.limit_residual:.3g})")
        lim = res.limit
        red = prob.reduced
        sols = [CriticalPointReport(red.coords(lim), lim, 0.5 * float(lim @ red.apply_A(lim)) - F.value(lim),
                                    float(np.linalg.norm(red.Q0.T @ (red.apply_A(lim) - F.apply(lim)))),
                                    prob.residual(lim), (0, 0, 0))]
    return WaveSolveResult(method, sols, [prob.residual(s.z) for s in sols],
                           [prob.fine_residual(s.z) for s in sols], hypotheses, details)


def linear_oracle(prob: WaveProblem) -> np.ndarray:
    """Direct solve of (A - G) u = H for the ``linear`` example."""
    nl = prob.nonlinearity
    G = multiplication_operator(nl.field_grid("g", prob.spec), prob.spec)
    H = analyze(prob.spec, nl.field_grid("h", prob.spec))
    return np.linalg.solve((prob.A - G).matrix, H)


def sandwich_gap_check(prob: WaveProblem, samples: int = 50, seed: int = 0):
    """Uniform spectral distance from zero for g1 <= g <= g2 (sandwich sampling)."""
    return gap_nondegeneracy_check(prob.A, prob.multiplication("g1"), prob.multiplication("g2"),
                                   samples, seed)
