"""Truncated self-adjoint operators, spectral splittings and gap reports."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ThresholdOnSpectrumError, ValidationError
from .fourier import TruncationSpec, basis_factors, mode_table, quadrature_weight

SYMMETRY_TOL = 1e-10
THRESHOLD_EXCLUSION = 1e-9


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Real symmetric matrix acting on truncated coefficient vectors.

    ``spec`` is None for abstract (non-wave) operators. The matrix is
    symmetrized on construction and frozen.
    """

    spec: TruncationSpec | None
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValidationError(f"operator matrix must be square, got shape {M.shape}")
        if self.spec is not None and M.shape[0] != self.spec.n_modes:
            raise ValidationError(
                f"matrix size {M.shape[0]} does not match {self.spec.n_modes} modes")
        if not np.all(np.isfinite(M)):
            raise ValidationError("operator matrix must be finite")
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def abstract(cls, matrix) -> "TruncatedOperator":
        return cls(None, matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        w, V = np.linalg.eigh(self.matrix)
        w.setflags(write=False)
        V.setflags(write=False)
        return w, V

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    def norm(self) -> float:
        w = self.eigenvalues
        return float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0

    def _check(self, other: "TruncatedOperator"):
        if self.dim != other.dim:
            raise ValidationError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, TruncatedOperator):
            self._check(other)
            return TruncatedOperator(self.spec, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, TruncatedOperator):
            self._check(other)
            return TruncatedOperator(self.spec, self.matrix - other.matrix)
        return NotImplemented

    def __mul__(self, c):
        return TruncatedOperator(self.spec, float(c) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return TruncatedOperator(self.spec, -self.matrix)

    def shift(self, c: float) -> "TruncatedOperator":
        """Return self + c * I."""
        return TruncatedOperator(self.spec, self.matrix + c * np.eye(self.dim))

    def __matmul__(self, v):
        return self.matrix @ v

    def to_dict(self) -> dict:
        return {
            "spec": None if self.spec is None else self.spec.to_dict(),
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruncatedOperator":
        spec = None if d.get("spec") is None else TruncationSpec(**d["spec"])
        return cls(spec, np.asarray(d["matrix"], dtype=float))


def identity(spec: TruncationSpec) -> TruncatedOperator:
    return TruncatedOperator(spec, np.eye(spec.n_modes))


def wave_eigenvalue(j: int, k: int, p: int, q: int) -> Fraction:
    """Eigenvalue of u_tt - u_xx on sin(jx) e^{i k p t / q}: j^2 - (kp/q)^2."""
    return Fraction(j * j) - Fraction(k * p, q) ** 2


def wave_operator(spec: TruncationSpec) -> TruncatedOperator:
    lam = [float(wave_eigenvalue(m.j, m.k, spec.p, spec.q)) for m in mode_table(spec)]
    return TruncatedOperator(spec, np.diag(lam))


def box_spectrum(p: int, q: int, lo: float, hi: float) -> list[Fraction]:
    """Distinct nonzero eigenvalues of the untruncated wave operator in [lo, hi].

    Uses (j - k w)(j + k w) with |j - k w| >= 1/q for nonzero values, so
    j + k w <= q * max(|lo|, |hi|) bounds the search.
    """
    bound = q * max(abs(lo), abs(hi)) + 1
    jmax = int(bound) + 1
    kmax = int(bound * q / p) + 1
    vals = set()
    for j in range(1, jmax + 1):
        for k in range(0, kmax + 1):
            lam = wave_eigenvalue(j, k, p, q)
            if lam != 0 and lo <= lam <= hi:
                vals.add(lam)
    return sorted(vals)


def multiplication_operator(g: np.ndarray, spec: TruncationSpec) -> TruncatedOperator:
    """Galerkin matrix of u -> g u under the tensor quadrature rule."""
    g = np.asarray(g, dtype=float)
    if g.shape != (spec.Nx, spec.Nt):
        raise ValidationError(
            f"coefficient grid shape {g.shape} does not match ({spec.Nx}, {spec.Nt})")
    if not np.all(np.isfinite(g)):
        raise ValidationError("coefficient grid must be finite")
    S, Tm = basis_factors(spec)
    X = np.einsum("mn,nc,nd->mcd", g, Tm, Tm, optimize=True)
    M = np.einsum("mj,mk,mcd->jckd", S, S, X, optimize=True)
    n = spec.n_modes
    return TruncatedOperator(spec, quadrature_weight(spec) * M.reshape(n, n))


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Projections onto the spectral subspaces (-inf, -l), (-l, l), (l, inf)."""

    l: float
    Pminus: np.ndarray = field(repr=False)
    Pzero: np.ndarray = field(repr=False)
    Pplus: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def masks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        w = self.eigenvalues
        return w < -self.l, np.abs(w) < self.l, w > self.l

    def basis(self, which: str) -> np.ndarray:
        """Orthonormal eigenbasis columns of one subspace ('-', '0', '+')."""
        minus, zero, plus = self.masks
        mask = {"-": minus, "0": zero, "+": plus}[which]
        return self.eigenvectors[:, mask]

    @property
    def ranks(self) -> tuple[int, int, int]:
        return tuple(int(m.sum()) for m in self.masks)

    def to_dict(self) -> dict:
        return {"l": self.l, "ranks": list(self.ranks),
                "eigenvalues": self.eigenvalues.tolist()}


def check_threshold(eigenvalues: np.ndarray, l: float):
    for s in (-l, l):
        d = np.abs(eigenvalues - s)
        if d.size and d.min() <= THRESHOLD_EXCLUSION:
            raise ThresholdOnSpectrumError(l, float(eigenvalues[np.argmin(d)]))


def spectral_split(op: TruncatedOperator, l: float) -> SpectralSplit:
    if not l > 0:
        raise ValidationError(f"threshold must be positive, got {l!r}")
    w, V = op.eigh
    check_threshold(w, l)
    projs = []
    for mask in (w < -l, np.abs(w) < l, w > l):
        Q = V[:, mask]
        P = Q @ Q.T
        P.setflags(write=False)
        projs.append(P)
    return SpectralSplit(float(l), *projs, w, V)


@dataclass(frozen=True)
class GapReport:
    interval: tuple[float, float]
    eigenvalues_inside: list[float]
    min_distance_to_endpoints: float

    def to_dict(self) -> dict:
        return {"interval": list(self.interval),
                "eigenvalues_inside": list(self.eigenvalues_inside),
                "min_distance_to_endpoints": self.min_distance_to_endpoints}


def gap_report(op: TruncatedOperator, a: float, b: float) -> GapReport:
    if not a < b:
        raise ValidationError(f"need a < b, got ({a}, {b})")
    w = op.eigenvalues
    inside = sorted(float(v) for v in w[(w > a) & (w < b)])
    dist = float(np.min(np.minimum(np.abs(w - a), np.abs(w - b)))) if w.size else float("inf")
    return GapReport((float(a), float(b)), inside, dist)
