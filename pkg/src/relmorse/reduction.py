"""Saddle point reduction of A z = F'(z) onto a finite-dimensional middle space.

With the threshold l in (l_F, b) off the spectrum of A, the space splits into
H^- (eigenvalues < -l), H^0 (|eigenvalue| < l) and H^+ (eigenvalues > l).
For x in H^0 the outer components solve the contraction

    z^{+-} = (A^{+-})^{-1} P^{+-} F'(x + z^{+-}),

with rate at most l_F / l, and critical points of the reduced functional

    a(x) = 1/2 (A z(x), z(x)) - F(z(x)),   z(x) = x + z^+(x) + z^-(x),

are exactly the solutions of the full equation. The gradient is
a'(x) = P^0 (A z(x) - F'(z(x))).

Points of H^0 are represented by coordinates in the orthonormal eigenbasis of
the middle space, so Euclidean norms of coordinates equal H norms.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import (BoundednessViolation, HypothesisViolation, NoConvergence,
                     NonContractionError, ValidationError)
from .index import relative_morse_index
from .operators import (THRESHOLD_EXCLUSION, SpectralSplit, TruncatedOperator, check_threshold,
                        spectral_split)

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
DEDUP_TOL = 1e-4
FD_STEP = np.finfo(float).eps ** (1 / 3)


@dataclass(frozen=True, eq=False)
class NonlinearMap:
    """A functional F on coefficient space with its gradient F' and Lipschitz bound of F'."""

    apply: Callable[[np.ndarray], np.ndarray]
    value: Callable[[np.ndarray], float]
    lipschitz_bound: float
    origin_norm: float | None = None

    @classmethod
    def zero(cls) -> "NonlinearMap":
        return cls(lambda z: np.zeros_like(z), lambda z: 0.0, 0.0, 0.0)

    @classmethod
    def linear(cls, B: TruncatedOperator, forcing: np.ndarray | None = None) -> "NonlinearMap":
        """F(z) = 1/2 (Bz, z) + (h, z)."""
        M = B.matrix
        h = np.zeros(B.dim) if forcing is None else np.asarray(forcing, dtype=float)
        return cls(lambda z: M @ z + h,
                   lambda z: 0.5 * float(z @ M @ z) + float(h @ z),
                   B.norm(), float(np.linalg.norm(h)))

    def plus_quadratic(self, B: TruncatedOperator) -> "NonlinearMap":
        """F(z) + 1/2 (Bz, z)."""
        M = B.matrix
        return NonlinearMap(lambda z: M @ z + self.apply(z),
                            lambda z: 0.5 * float(z @ M @ z) + self.value(z),
                            B.norm() + self.lipschitz_bound, self.origin_norm)

    def homotopy(self, B1: TruncatedOperator, lam: float) -> "NonlinearMap":
        """(1 - lam)/2 (B1 z, z) + lam F(z)."""
        M = B1.matrix
        return NonlinearMap(lambda z: (1 - lam) * (M @ z) + lam * self.apply(z),
                            lambda z: 0.5 * (1 - lam) * float(z @ M @ z) + lam * self.value(z),
                            max(B1.norm(), self.lipschitz_bound))


def choose_threshold(eigenvalues: np.ndarray, lipschitz: float, upper: float | None = None) -> float:
    """Midpoint of the first spectral gap of |eigenvalues| above ``lipschitz``.

    Picking the first gap keeps [l_F, l] free of spectrum. ``upper`` caps the
    threshold (the gap radius b).
    """
    a = np.sort(np.abs(np.asarray(eigenvalues, dtype=float)))
    above = a[a > lipschitz + 2 * THRESHOLD_EXCLUSION]
    hi = above[0] if above.size else max(2 * lipschitz, lipschitz + 1.0)
    if upper is not None:
        hi = min(hi, upper)
    if not hi > lipschitz:
        raise ValidationError(
            f"no admissible threshold: Lipschitz bound {lipschitz:.6g} >= cap {hi:.6g}")
    return float(0.5 * (lipschitz + hi))


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """Reduction data for (A + shift I) z = F'(z) at threshold split.l.

    ``shift`` lets a family A + eps I reuse one eigenbasis (regularization).
    """

    A: TruncatedOperator
    split: SpectralSplit
    F: NonlinearMap
    contraction_tol: float = 1e-12
    max_iter: int = 10_000
    shift: float = 0.0
    gap_radius: float | None = None

    def __post_init__(self):
        l, lF = self.split.l, self.F.lipschitz_bound
        if not lF < l:
            raise ValidationError(f"need l_F < l, got l_F={lF:.6g}, l={l:.6g}")
        if self.gap_radius is not None and not l < self.gap_radius:
            raise ValidationError(f"need l < b, got l={l:.6g}, b={self.gap_radius:.6g}")
        check_threshold(self.split.eigenvalues + self.shift, l)

    @classmethod
    def build(cls, A: TruncatedOperator, F: NonlinearMap, l: float | None = None,
              gap_radius: float | None = None, **kw) -> "ReducedProblem":
        if l is None:
            l = choose_threshold(A.eigenvalues, F.lipschitz_bound, gap_radius)
        return cls(A, spectral_split(A, l), F, gap_radius=gap_radius, **kw)

    def shifted(self, eps: float) -> "ReducedProblem":
        return replace(self, shift=self.shift + eps)

    def with_nonlinearity(self, F: NonlinearMap) -> "ReducedProblem":
        return replace(self, F=F)

    @cached_property
    def _blocks(self):
        w = self.split.eigenvalues + self.shift
        V = self.split.eigenvectors
        l = self.split.l
        zero = np.abs(w) < l
        outer = ~zero
        return V[:, zero], w[zero], V[:, outer], w[outer], w[outer] > 0

    @property
    def Q0(self) -> np.ndarray:
        return self._blocks[0]

    @property
    def lam0(self) -> np.ndarray:
        return self._blocks[1]

    @property
    def dim0(self) -> int:
        return self.Q0.shape[1]

    @property
    def l(self) -> float:
        return self.split.l

    @property
    def rate(self) -> float:
        return self.F.lipschitz_bound / self.split.l

    @cached_property
    def origin_norm(self) -> float:
        if self.F.origin_norm is not None:
            return self.F.origin_norm
        return float(np.linalg.norm(self.F.apply(np.zeros(self.A.dim))))

    def embed(self, x: np.ndarray) -> np.ndarray:
        return self.Q0 @ np.asarray(x, dtype=float)

    def coords(self, z: np.ndarray) -> np.ndarray:
        return self.Q0.T @ z

    def apply_A(self, z: np.ndarray) -> np.ndarray:
        return self.A.matrix @ z + self.shift * z

    def apriori_bound(self, x_norm: float) -> float:
        lF, l = self.F.lipschitz_bound, self.split.l
        return (lF * x_norm + self.origin_norm) / (l - lF)


@dataclass(frozen=True, eq=False)
class ZSplit:
    zplus: np.ndarray
    zminus: np.ndarray
    iterations: int
    ratios: list[float] = field(repr=False)
    outer: np.ndarray = field(repr=False)  # coordinates in the H^+- eigenbasis


def fixed_point_z(prob: ReducedProblem, x: np.ndarray, initial: np.ndarray | None = None) -> ZSplit:
    """Outer components z^+(x), z^-(x) by Picard iteration from ``initial`` (default 0).

    ``initial`` is either a full vector or outer-basis coordinates.
    """
    Q0, _, Qo, wo, plus = prob._blocks
    x = np.asarray(x, dtype=float)
    if x.shape != (Q0.shape[1],):
        raise ValidationError(f"x must have {Q0.shape[1]} middle-space coordinates")
    base = Q0 @ x
    if initial is None:
        w = np.zeros(Qo.shape[1])
    else:
        initial = np.asarray(initial, dtype=float)
        w = Qo.T @ initial if initial.shape[0] == prob.A.dim and Qo.shape[1] != prob.A.dim else initial.copy()
    ratios = []
    prev = None
    for it in range(1, prob.max_iter + 1):
        z = base + Qo @ w
        w_new = (Qo.T @ prob.F.apply(z)) / wo
        step = float(np.linalg.norm(w_new - w))
        floor = 1e-13 * max(1.0, float(np.linalg.norm(z)))
        if prev is not None and prev > floor and step > floor:
            ratios.append(step / prev)
        prev = step
        w = w_new
        if step <= prob.contraction_tol * max(1.0, float(np.linalg.norm(w))):
            break
    else:
        raise NonContractionError(
            f"fixed point not reached in {prob.max_iter} iterations (last update {step:.3g}); "
            f"check l_F={prob.F.lipschitz_bound:.6g} against l={prob.l:.6g}")
    zplus = Qo[:, plus] @ w[plus]
    zminus = Qo[:, ~plus] @ w[~plus]
    return ZSplit(zplus, zminus, it, ratios, w)


@dataclass(frozen=True, eq=False)
class _State:
    x: np.ndarray
    z: np.ndarray
    Fz: np.ndarray
    outer: np.ndarray

    def grad(self, prob: ReducedProblem) -> np.ndarray:
        return prob.lam0 * self.x - prob.Q0.T @ self.Fz


def _state(prob: ReducedProblem, x, initial=None) -> _State:
    zs = fixed_point_z(prob, x, initial)
    z = prob.embed(x) + zs.zplus + zs.zminus
    return _State(np.asarray(x, dtype=float), z, prob.F.apply(z), zs.outer)


def reduced_value(prob: ReducedProblem, x, initial=None) -> float:
    s = _state(prob, x, initial)
    return 0.5 * float(s.z @ prob.apply_A(s.z)) - prob.F.value(s.z)


def reduced_gradient(prob: ReducedProblem, x, initial=None) -> np.ndarray:
    return _state(prob, x, initial).grad(prob)


def full_vector(prob: ReducedProblem, x, initial=None) -> np.ndarray:
    return _state(prob, x, initial).z


def residual(prob: ReducedProblem, z: np.ndarray) -> float:
    return float(np.linalg.norm(prob.apply_A(z) - prob.F.apply(z)))


@dataclass(frozen=True, eq=False)
class CriticalPointReport:
    x: np.ndarray
    z: np.ndarray
    value: float
    grad_norm: float
    residual: float
    hessian_signature: tuple[int, int, int]

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "z": self.z.tolist(), "value": self.value,
                "grad_norm": self.grad_norm, "residual": self.residual,
                "z_norm": float(np.linalg.norm(self.z)),
                "hessian_signature": list(self.hessian_signature)}


class _BudgetExhausted(Exception):
    pass


class _Evaluator:
    """Gradient/value oracle with warm starts and a gradient-evaluation budget."""

    def __init__(self, prob: ReducedProblem, budget: int | None = None):
        self.prob = prob
        self.budget = budget
        self.count = 0
        self._warm = None

    def state(self, x) -> _State:
        if self.budget is not None and self.count >= self.budget:
            raise _BudgetExhausted
        self.count += 1
        s = _state(self.prob, x, self._warm)
        self._warm = s.outer
        return s

    def grad(self, x) -> np.ndarray:
        return self.state(x).grad(self.prob)

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        s = self.state(x)
        v = 0.5 * float(s.z @ self.prob.apply_A(s.z)) - self.prob.F.value(s.z)
        return v, s.grad(self.prob)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.size
        h = FD_STEP * (1.0 + float(np.linalg.norm(x)))
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            H[:, i] = (self.grad(x + e) - self.grad(x - e)) / (2 * h)
        return 0.5 * (H + H.T)


def hessian_signature(H: np.ndarray) -> tuple[int, int, int]:
    if H.size == 0:
        return (0, 0, 0)
    w = np.linalg.eigvalsh(H)
    tol = 1e-6 * max(1.0, float(np.abs(w).max()))
    return (int(np.sum(w < -tol)), int(np.sum(np.abs(w) <= tol)), int(np.sum(w > tol)))


def _newton(ev: _Evaluator, x0, max_iter: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton on a'(x) = 0 with finite-difference Hessians.

    Runs past GRAD_TOL until the gradient stops improving, so accepted points
    sit at round-off level.
    """
    x = np.asarray(x0, dtype=float).copy()
    g = ev.grad(x)
    floor = 1e-14 * (1.0 + float(np.linalg.norm(x)))
    for _ in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= floor:
            break
        H = ev.hessian(x)
        d = np.linalg.lstsq(H, -g, rcond=None)[0]
        t = 1.0
        while t >= 1e-6:
            xn = x + t * d
            gnew = ev.grad(xn)
            if np.linalg.norm(gnew) <= (1 - 1e-4 * t) * gn:
                break
            t *= 0.5
        else:
            break
        improved = float(np.linalg.norm(gnew))
        x, g = xn, gnew
        if gn <= GRAD_TOL and improved > 0.5 * gn:
            break
    return x, g


def _report(ev: _Evaluator, x) -> CriticalPointReport:
    prob = ev.prob
    s = ev.state(x)
    value = 0.5 * float(s.z @ prob.apply_A(s.z)) - prob.F.value(s.z)
    sig = hessian_signature(ev.hessian(x)) if prob.dim0 else (0, 0, 0)
    return CriticalPointReport(np.array(x, dtype=float), s.z, value,
                               float(np.linalg.norm(s.grad(prob))), residual(prob, s.z), sig)


def _lattice(n: int, seed: int, scale: float, n_sobol: int) -> list[np.ndarray]:
    pts = [np.zeros(n)]
    for r in (0.5, 2.0, 8.0):
        for i in range(n):
            for sgn in (1.0, -1.0):
                e = np.zeros(n)
                e[i] = sgn * r * scale
                pts.append(e)
    if n_sobol:
        sob = qmc.Sobol(n, scramble=True, seed=seed).random(n_sobol)
        pts.extend(4.0 * scale * (2.0 * sob - 1.0))
    return pts


def _dedup(reports: list[CriticalPointReport]) -> list[CriticalPointReport]:
    out: list[CriticalPointReport] = []
    for r in reports:
        if all(np.linalg.norm(r.x - o.x) > DEDUP_TOL for o in out):
            out.append(r)
    return sorted(out, key=lambda r: (r.value, tuple(r.x)))


def find_critical_points(prob: ReducedProblem, strategy: str = "multistart_newton",
                         budget: int = 4000, seed: int = 0,
                         starts: Sequence[np.ndarray] | None = None,
                         scale: float = 1.0, n_sobol: int = 8) -> list[CriticalPointReport]:
    """Critical points of the reduced functional with ||a'|| <= 1e-8.

    ``maximize`` ascends a from each start (BFGS on -a) and polishes with
    Newton; ``multistart_newton`` runs damped Newton directly. Starts default
    to a seeded lattice: the origin, +-{0.5, 2, 8}*scale on each axis and
    scrambled Sobol points in [-4 scale, 4 scale]^n. ``budget`` bounds the
    number of gradient evaluations. Results are deduplicated (distance
    > 1e-4) and sorted by value, then x.
    """
    if strategy not in ("maximize", "multistart_newton"):
        raise ValidationError(f"unknown strategy {strategy!r}")
    n = prob.dim0
    ev = _Evaluator(prob, budget)
    if n == 0:
        return [_report(ev, np.zeros(0))]
    if starts is None:
        starts = _lattice(n, seed, scale, n_sobol)
    found = []
    tried = 0
    try:
        for x0 in starts:
            tried += 1
            x0 = np.asarray(x0, dtype=float)
            if strategy == "maximize":
                res = optimize.minimize(lambda x: tuple(-v for v in ev.value_and_grad(x)),
                                        x0, jac=True, method="BFGS",
                                        options={"gtol": 1e-10, "maxiter": 500})
                x0 = res.x
            x, g = _newton(ev, x0)
            if np.linalg.norm(g) <= GRAD_TOL:
                found.append(_report(ev, x))
    except _BudgetExhausted:
        log.warning("critical point search stopped after %d of %d starts: budget %d exhausted",
                    tried, len(starts), budget)
    if not found:
        log.warning("no critical point found (strategy=%s, starts tried=%d, gradient evals=%d)",
                    strategy, tried, ev.count)
    return _dedup(found)


def solve_from(prob: ReducedProblem, x0, budget: int | None = None) -> CriticalPointReport | None:
    """Single damped-Newton solve from ``x0``; None if it does not reach 1e-8."""
    ev = _Evaluator(prob, budget)
    if prob.dim0 == 0:
        return _report(ev, np.zeros(0))
    try:
        x, g = _newton(ev, x0)
    except _BudgetExhausted:
        return None
    if np.linalg.norm(g) > GRAD_TOL:
        return None
    return _report(ev, x)


def _band_threshold(w: np.ndarray, eps_max: float, lipschitz: float) -> float:
    """Threshold above ``lipschitz`` avoiding every band {|lam + e| : 0 <= e <= eps_max}.

    Keeps the middle space the same for the whole regularization family.
    """
    lo = np.where((w < 0) & (w + eps_max > 0), 0.0, np.minimum(np.abs(w), np.abs(w + eps_max)))
    hi = np.maximum(np.abs(w), np.abs(w + eps_max))
    start = lipschitz
    for a, b in sorted(zip(lo, hi)):
        if a > start + 2 * THRESHOLD_EXCLUSION:
            return float(0.5 * (start + a))
        start = max(start, b)
    return float(start + max(1.0, start))


@dataclass(frozen=True, eq=False)
class RegularizationResult:
    eps: list[float]
    solutions: list[np.ndarray] = field(repr=False)
    kernel_norms: list[float]
    complement_norms: list[float]
    distances: list[float]
    cauchy: bool
    limit: np.ndarray = field(repr=False)
    limit_residual: float
    polished: bool

    def to_dict(self) -> dict:
        return {"eps": self.eps, "kernel_norms": self.kernel_norms,
                "complement_norms": self.complement_norms, "distances": self.distances,
                "cauchy": self.cauchy, "limit": self.limit.tolist(),
                "limit_norm": float(np.linalg.norm(self.limit)),
                "limit_residual": self.limit_residual, "polished": self.polished}


def regularized_solve(A: TruncatedOperator, Binf: TruncatedOperator, r: NonlinearMap,
                      eps_sequence: Sequence[float], l: float | None = None,
                      kernel_tol: float = 1e-8, ceiling: float = 1e6,
                      budget: int = 4000, seed: int = 0) -> RegularizationResult:
    """Solve eps z + (A - Binf) z = r(z) along decreasing eps and pass to the limit.

    Each regularized equation is reduced as (A + eps) z = Binf z + r(z) on a
    shared eigenbasis; solutions are continued from one eps to the next. The
    limit candidate is polished by Newton on the unregularized equation and
    its residual ||(A - Binf) z - r(z)|| reported.
    """
    eps = [float(e) for e in eps_sequence]
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValidationError("eps_sequence must be positive and strictly decreasing")
    D = A - Binf
    wD, VD = D.eigh
    tol = kernel_tol * max(1.0, D.norm())
    ker = np.abs(wD) < tol
    eta = float(np.min(np.abs(wD[~ker]))) if (~ker).any() else np.inf
    if eps[0] >= eta:
        raise ValidationError(f"eps must lie in (0, {eta:.6g}), the gap of A - Binf at zero")
    K = VD[:, ker]
    F = r.plus_quadratic(Binf)
    if l is None:
        l = _band_threshold(A.eigenvalues, eps[0], F.lipschitz_bound)
    base = ReducedProblem.build(A, F, l)

    sols, kn, cn = [], [], []
    x = np.zeros(base.dim0)
    for i, e in enumerate(eps):
        prob = base.shifted(e)
        rep = solve_from(prob, x, budget)
        if rep is None:
            found = find_critical_points(prob, "multistart_newton", budget, seed)
            if not found:
                raise NoConvergence(f"no regularized solution found at eps={e:g}")
            rep = min(found, key=lambda c: float(np.linalg.norm(c.x - x)))
        z = rep.z
        u = K.T @ z
        if np.linalg.norm(u) > ceiling:
            raise NoConvergence(
                f"kernel component {np.linalg.norm(u):.3g} exceeds ceiling {ceiling:g} at eps={e:g}")
        sols.append(z)
        kn.append(float(np.linalg.norm(u)))
        cn.append(float(np.linalg.norm(z - K @ u)))
        x = rep.x
    dist = [float(np.linalg.norm(a - b)) for a, b in zip(sols, sols[1:])]
    cauchy = all(b <= a for a, b in zip(dist, dist[1:]))

    final = solve_from(base, x, budget)
    polished = final is not None
    limit = final.z if polished else sols[-1]
    res = float(np.linalg.norm(D.matrix @ limit - r.apply(limit)))
    return RegularizationResult(eps, sols, kn, cn, dist, cauchy, limit, res, polished)


@dataclass(frozen=True, eq=False)
class HomotopyResult:
    lambdas: list[float]
    solutions: list[np.ndarray] = field(repr=False)
    residuals: list[float]
    final: CriticalPointReport

    def to_dict(self) -> dict:
        return {"lambdas": self.lambdas, "residuals": self.residuals,
                "norms": [float(np.linalg.norm(z)) for z in self.solutions],
                "final": self.final.to_dict()}


def homotopy_solve(A: TruncatedOperator, B1: TruncatedOperator, F: NonlinearMap,
                   lambda_grid: Sequence[float] | None = None, l: float | None = None,
                   radius: float = 1e6, gap_radius: float | None = None,
                   budget: int = 4000, max_halvings: int = 10) -> HomotopyResult:
    """Continue the solution of A z = (1 - lam) B1 z + lam F'(z) from lam = 0 to 1.

    Requires nu_A(B1) = 0 so that z = 0 is the unique solution at lam = 0.
    A step that fails to converge is halved (up to ``max_halvings`` times).
    Leaving the ball of ``radius`` raises BoundednessViolation.
    """
    grid = list(np.linspace(0.0, 1.0, 21)) if lambda_grid is None else [float(v) for v in lambda_grid]
    if grid[0] != 0.0 or grid[-1] != 1.0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("lambda_grid must increase strictly from 0 to 1")
    pair = relative_morse_index(A, B1)
    if pair.nullity != 0:
        raise HypothesisViolation("nu_A(B1)=0", f"A - B1 has nullity {pair.nullity}",
                                  {"nullity": pair.nullity})
    lhat = max(B1.norm(), F.lipschitz_bound)
    if l is None:
        l = choose_threshold(A.eigenvalues, lhat, gap_radius)
    base = ReducedProblem.build(A, NonlinearMap.zero(), l, gap_radius)
    # the split only depends on A; swap in each F_lambda
    probs = {}

    def problem(lam):
        if lam not in probs:
            probs[lam] = ReducedProblem(A, base.split, F.homotopy(B1, lam), gap_radius=gap_radius)
        return probs[lam]

    lams, sols, res = [0.0], [np.zeros(A.dim)], [residual(problem(0.0), np.zeros(A.dim))]
    x = np.zeros(base.dim0)
    targets = grid[1:]
    halvings = 0
    rep = None
    while targets:
        lam = targets[0]
        rep = solve_from(problem(lam), x, budget)
        if rep is None:
            if halvings >= max_halvings:
                raise BoundednessViolation(f"continuation stalled near lambda={lam:g}")
            halvings += 1
            targets.insert(0, 0.5 * (lams[-1] + lam))
            continue
        targets.pop(0)
        if np.linalg.norm(rep.z) > radius:
            raise BoundednessViolation(
                f"path left the ball of radius {radius:g} at lambda={lam:g} "
                f"(|z|={np.linalg.norm(rep.z):.3g})")
        lams.append(lam)
        sols.append(rep.z)
        res.append(rep.residual)
        x = rep.x
    if rep is None:
        rep = _report(_Evaluator(problem(1.0)), x)
    return HomotopyResult(lams, sols, res, rep)
