"""Relative Morse index, nullity and spectral flow for truncated operators.

In finite dimensions the relative Morse index of B with respect to A is the
Fredholm index of the orthogonal projection from the negative spectral
subspace of A - B onto the negative spectral subspace of A. It is computed
here from the projection itself (singular values of W^T V), while the plain
difference of negative-eigenvalue counts serves as an independent check.

Spectral flow of t -> A - tB counts eigenvalue branches crossing zero,
+1 for a crossing from positive to negative as t increases, so that the flow
over [t0, t1] equals m^-(A - t1 B) - m^-(A - t0 B) at nondegenerate ends.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import (DegenerateEndpointError, GapViolationError, HypothesisViolation,
                     NumericalFailure, ValidationError)
from .fourier import TruncationSpec
from .operators import TruncatedOperator

DEFAULT_KERNEL_TOL = 1e-8
ORTHONORMAL_TOL = 1e-10
SINGULAR_TOL = 1e-8


class IllConditionedNullity(UserWarning):
    """An eigenvalue sits near the edge of the kernel window."""


@dataclass(frozen=True)
class IndexPair:
    index: int
    nullity: int
    spec: TruncationSpec | None
    kernel_tol: float
    stable: bool = False
    ill_conditioned: bool = False

    def to_dict(self) -> dict:
        return {"index": self.index, "nullity": self.nullity,
                "spec": None if self.spec is None else self.spec.to_dict(),
                "kernel_tol": self.kernel_tol, "stable": self.stable,
                "ill_conditioned": self.ill_conditioned}


@dataclass(frozen=True)
class ProjectionIndexResult:
    dim_domain: int
    dim_codomain: int
    dim_kernel: int
    dim_cokernel: int

    @property
    def index(self) -> int:
        return self.dim_kernel - self.dim_cokernel


class Crossing(NamedTuple):
    t: float
    branch: int
    sign: int


@dataclass(frozen=True)
class FlowResult:
    flow: int
    crossings: list[Crossing]
    partition: list[float] = field(repr=False)

    def to_dict(self) -> dict:
        return {"flow": self.flow,
                "crossings": [{"t": c.t, "branch": c.branch, "sign": c.sign}
                              for c in self.crossings],
                "partition_size": len(self.partition)}


def scaled_tol(kernel_tol: float, op: TruncatedOperator) -> float:
    return kernel_tol * max(1.0, op.norm())


def _ill_conditioned(w: np.ndarray, tol: float) -> bool:
    a = np.abs(w)
    return bool(np.any((a >= 0.1 * tol) & (a <= 1.1 * tol)))


def nullity(A: TruncatedOperator, B: TruncatedOperator, kernel_tol: float) -> int:
    """Number of eigenvalues of A - B in (-kernel_tol, kernel_tol).

    Emits IllConditionedNullity when some eigenvalue magnitude falls in
    [0.1, 1.1] * kernel_tol, where the kernel/non-kernel call is not clean.
    """
    if not kernel_tol > 0:
        raise ValidationError("kernel_tol must be positive")
    w = (A - B).eigenvalues
    if _ill_conditioned(w, kernel_tol):
        warnings.warn(f"eigenvalue near kernel window edge {kernel_tol:g}",
                      IllConditionedNullity, stacklevel=2)
    return int(np.sum(np.abs(w) < kernel_tol))


def _check_orthonormal(Q: np.ndarray, name: str):
    if Q.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d column array")
    G = Q.T @ Q
    if G.size and np.abs(G - np.eye(G.shape[0])).max() > ORTHONORMAL_TOL:
        raise ValidationError(f"{name} columns are not orthonormal within {ORTHONORMAL_TOL}")


def projection_index(domain_basis: np.ndarray, codomain_basis: np.ndarray) -> ProjectionIndexResult:
    """Index of the orthogonal projection onto span(W) restricted to span(V)."""
    V = np.asarray(domain_basis, dtype=float)
    W = np.asarray(codomain_basis, dtype=float)
    _check_orthonormal(V, "domain_basis")
    _check_orthonormal(W, "codomain_basis")
    if V.shape[0] != W.shape[0]:
        raise ValidationError("bases live in different ambient dimensions")
    m, n = W.shape[1], V.shape[1]
    if m and n:
        s = np.linalg.svd(W.T @ V, compute_uv=False)
        rank = int(np.sum(s > SINGULAR_TOL))
    else:
        rank = 0
    return ProjectionIndexResult(n, m, n - rank, m - rank)


def negative_basis(op: TruncatedOperator, tol: float) -> np.ndarray:
    w, V = op.eigh
    return V[:, w <= -tol]


def morse_count(op: TruncatedOperator, tol: float) -> int:
    return int(np.sum(op.eigenvalues <= -tol))


def check_in_gap(B: TruncatedOperator, gap: tuple[float, float]):
    lo, hi = gap
    w = B.eigenvalues
    if not (w[0] > lo and w[-1] < hi):
        raise GapViolationError(
            f"perturbation spectrum [{w[0]:.6g}, {w[-1]:.6g}] not strictly inside ({lo}, {hi})")


def relative_morse_index(A: TruncatedOperator, B: TruncatedOperator,
                         kernel_tol: float = DEFAULT_KERNEL_TOL,
                         gap: tuple[float, float] | None = None) -> IndexPair:
    """Index pair (i_A(B), nu_A(B)) at the operators' truncation.

    ``kernel_tol`` is relative to max(1, ||A - B||). When ``gap`` = (a, b) is
    given, a I < B < b I is enforced.
    """
    A._check(B)
    if gap is not None:
        check_in_gap(B, gap)
    D = A - B
    tol = scaled_tol(kernel_tol, D)
    res = projection_index(negative_basis(D, tol), negative_basis(A, tol))
    w = D.eigenvalues
    return IndexPair(
        index=res.index,
        nullity=int(np.sum(np.abs(w) < tol)),
        spec=A.spec,
        kernel_tol=tol,
        ill_conditioned=_ill_conditioned(w, tol),
    )


def index_pair_stable(build: Callable[[TruncationSpec], tuple[TruncatedOperator, TruncatedOperator]],
                      spec: TruncationSpec, kernel_tol: float = DEFAULT_KERNEL_TOL,
                      gap: tuple[float, float] | None = None) -> IndexPair:
    """Index pair at ``spec`` with the stable flag set by recomputing at (J+2, K+2)."""
    pair = relative_morse_index(*build(spec), kernel_tol=kernel_tol, gap=gap)
    fine = relative_morse_index(*build(spec.refine()), kernel_tol=kernel_tol, gap=gap)
    stable = (pair.index, pair.nullity) == (fine.index, fine.nullity)
    return IndexPair(pair.index, pair.nullity, spec, pair.kernel_tol, stable,
                     pair.ill_conditioned)


def spectral_flow(A: TruncatedOperator, B: TruncatedOperator, t0: float = 0.0, t1: float = 1.0,
                  steps: int = 16, kernel_tol: float = DEFAULT_KERNEL_TOL,
                  max_evals: int = 200_000) -> FlowResult:
    """Signed count of zero crossings of the eigenvalues of A - tB on [t0, t1].

    Sorted eigenvalues of A - tB are ||B||-Lipschitz in t. An interval is
    bisected while some branch could touch zero inside it (|mu(s)| + |mu(u)|
    <= ||B|| (u - s)); crossings are resolved until a branch moves less than
    kernel_tol / 2 across the interval.
    """
    A._check(B)
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    if not t1 > t0:
        raise ValidationError("need t1 > t0")
    L = B.norm()
    tol = kernel_tol * max(1.0, (A - t0 * B).norm(), (A - t1 * B).norm())
    M, N = A.matrix, B.matrix
    evals = {}

    def eig(t):
        if t not in evals:
            if len(evals) >= max_evals:
                raise NumericalFailure("spectral flow exceeded its evaluation budget")
            evals[t] = np.linalg.eigvalsh(M - t * N)
        return evals[t]

    for t in (t0, t1):
        w = eig(t)
        if np.any(np.abs(w) < tol):
            raise DegenerateEndpointError(
                f"A - {t}B has an eigenvalue within {tol:.3g} of zero; perturb the endpoint")

    crossings: list[Crossing] = []
    min_width = 0.5 * tol / L if L > 0 else np.inf

    def process(s, u):
        es, eu = eig(s), eig(u)
        width = u - s
        near = np.abs(es) + np.abs(eu) <= L * width * (1 + 1e-12)
        if not near.any():
            return
        if width <= min_width or width <= 1e-15 * max(1.0, abs(u)):
            for i in np.flatnonzero(near):
                if es[i] > 0 > eu[i]:
                    crossings.append(Crossing(0.5 * (s + u), int(i), +1))
                elif es[i] < 0 < eu[i]:
                    crossings.append(Crossing(0.5 * (s + u), int(i), -1))
            return
        mid = 0.5 * (s + u)
        # a node exactly on a crossing would hide the sign change
        for nudge in (0.0, 1e-3, -2e-3, 3e-3):
            mid = 0.5 * (s + u) + nudge * width
            if not np.any(eig(mid) == 0.0):
                break
        process(s, mid)
        process(mid, u)

    nodes = np.linspace(t0, t1, steps + 1)
    h = (t1 - t0) / steps
    for i in range(1, steps):
        for nudge in (0.0, 1e-3, -2e-3, 3e-3):
            t = float(nodes[i] + nudge * h)
            if not np.any(eig(t) == 0.0):
                nodes[i] = t
                break
    for s, u in zip(nodes[:-1], nodes[1:]):
        process(float(s), float(u))
    crossings.sort()
    return FlowResult(sum(c.sign for c in crossings), crossings, sorted(evals))


@dataclass(frozen=True)
class GapCheck:
    epsilon_estimate: float
    witnesses: list[tuple[str, float]]
    index: int
    samples: int

    def to_dict(self) -> dict:
        return {"epsilon_estimate": self.epsilon_estimate, "index": self.index,
                "samples": self.samples,
                "witnesses": [{"label": k, "distance": d} for k, d in self.witnesses]}


def sandwich_sampler(B1: TruncatedOperator, B2: TruncatedOperator):
    """Random B = B1 + D^1/2 C D^1/2 with D = B2 - B1 and 0 <= C <= I, so B1 <= B <= B2."""
    w, V = (B2 - B1).eigh
    R = V * np.sqrt(np.clip(w, 0.0, None))
    n = B1.dim

    def draw(rng: np.random.Generator) -> TruncatedOperator:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        C = (Q * rng.uniform(0.0, 1.0, n)) @ Q.T
        return TruncatedOperator(B1.spec, B1.matrix + R @ C @ R.T)

    return draw


def gap_nondegeneracy_check(A: TruncatedOperator, B1: TruncatedOperator, B2: TruncatedOperator,
                            samples: int = 50, seed: int = 0,
                            kernel_tol: float = DEFAULT_KERNEL_TOL,
                            sampler: Callable[[np.random.Generator], TruncatedOperator] | None = None,
                            ) -> GapCheck:
    """Estimate a uniform distance from sigma(A - B) to zero for B1 <= B <= B2.

    Raises HypothesisViolation (without sampling) if B1 <= B2, equal indices,
    or nu_A(B2) = 0 fails. The endpoints B1 and B2 are always included.
    """
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    lo = (B2 - B1).eigenvalues[0]
    if lo < -1e-10:
        raise HypothesisViolation("B1<=B2", "B2 - B1 is not positive semidefinite",
                                  {"min_eigenvalue": float(lo)})
    p1 = relative_morse_index(A, B1, kernel_tol)
    p2 = relative_morse_index(A, B2, kernel_tol)
    evidence = {"i_A(B1)": p1.index, "i_A(B2)": p2.index, "nu_A(B2)": p2.nullity}
    if p2.nullity != 0:
        raise HypothesisViolation("nu_A(B2)=0", f"nullity of A - B2 is {p2.nullity}", evidence)
    if p1.index != p2.index:
        raise HypothesisViolation("i_A(B1)=i_A(B2)",
                                  f"indices differ ({p1.index} vs {p2.index})", evidence)
    draw = sampler or sandwich_sampler(B1, B2)
    rng = np.random.default_rng(seed)
    witnesses = []
    for label, B in [("B1", B1), ("B2", B2)] + [(f"sample{i}", draw(rng)) for i in range(samples)]:
        d = float(np.min(np.abs((A - B).eigenvalues)))
        witnesses.append((label, d))
    eps = min(d for _, d in witnesses)
    return GapCheck(eps, witnesses, p1.index, samples)
