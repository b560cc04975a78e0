"""Truncated Fourier model of L^2([0, pi] x S^1) with Dirichlet conditions in x.

Basis functions are products sin(j x) * {1, cos(k w t), sin(k w t)} with
w = p/q, each scaled to unit L^2 norm on [0, pi] x [0, T], T = 2 pi q / p.
Coefficient vectors are ordered by ascending j, then ascending k, cos before
sin (the k = 0 mode has no sin partner).

Grid: midpoint nodes x_m = pi (m + 1/2) / Nx and uniform periodic nodes
t_n = T n / Nt. The tensor rule is exact for products of two basis functions
as long as Nx > J and Nt > 2K, so analysis is an exact left inverse of
synthesis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TruncationSpec:
    """Coprime period pair, mode cutoffs and quadrature grid sizes.

    ``Nx`` and ``Nt`` default to the minimum oversampled sizes 4J and 4K + 4.
    """

    p: int
    q: int
    J: int
    K: int
    Nx: int = None
    Nt: int = None

    def __post_init__(self):
        for name in ("p", "q", "J"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.K, (int, np.integer)) or self.K < 0:
            raise ValidationError(f"K must be a non-negative integer, got {self.K!r}")
        if math.gcd(int(self.p), int(self.q)) != 1:
            raise ValidationError(f"p={self.p} and q={self.q} must be coprime")
        if self.Nx is None:
            object.__setattr__(self, "Nx", 4 * self.J)
        if self.Nt is None:
            object.__setattr__(self, "Nt", 4 * self.K + 4)
        if self.Nx < 4 * self.J:
            raise ValidationError(f"Nx={self.Nx} must be >= 4J={4 * self.J}")
        if self.Nt < 4 * self.K + 4:
            raise ValidationError(f"Nt={self.Nt} must be >= 4K+4={4 * self.K + 4}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi * self.q / self.p

    @property
    def omega(self) -> float:
        return self.p / self.q

    @property
    def n_modes(self) -> int:
        return self.J * (2 * self.K + 1)

    def refine(self, dJ: int = 2, dK: int = 2) -> "TruncationSpec":
        """Next truncation used for stability checks; grids grow with the cutoffs."""
        return replace(self, J=self.J + dJ, K=self.K + dK,
                       Nx=self.Nx + 4 * dJ, Nt=self.Nt + 4 * dK)

    def fine(self, factor: int = 2) -> "TruncationSpec":
        """Same modes on a ``factor``-times denser quadrature grid."""
        return replace(self, Nx=factor * self.Nx, Nt=factor * self.Nt)

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "J": self.J, "K": self.K,
                "Nx": self.Nx, "Nt": self.Nt}


class ModeIndex(NamedTuple):
    j: int
    k: int
    phase: str  # "cos" or "sin"


def mode_table(spec: TruncationSpec) -> list[ModeIndex]:
    modes = []
    for j in range(1, spec.J + 1):
        modes.append(ModeIndex(j, 0, "cos"))
        for k in range(1, spec.K + 1):
            modes.append(ModeIndex(j, k, "cos"))
            modes.append(ModeIndex(j, k, "sin"))
    return modes


def grid(spec: TruncationSpec) -> tuple[np.ndarray, np.ndarray]:
    """1-d node arrays (x, t)."""
    x = math.pi * (np.arange(spec.Nx) + 0.5) / spec.Nx
    t = spec.period * np.arange(spec.Nt) / spec.Nt
    return x, t


def mesh(spec: TruncationSpec) -> tuple[np.ndarray, np.ndarray]:
    x, t = grid(spec)
    return np.meshgrid(x, t, indexing="ij")


def quadrature_weight(spec: TruncationSpec) -> float:
    return (math.pi / spec.Nx) * (spec.period / spec.Nt)


@lru_cache(maxsize=64)
def _factors(spec: TruncationSpec) -> tuple[np.ndarray, np.ndarray]:
    x, t = grid(spec)
    j = np.arange(1, spec.J + 1)
    S = math.sqrt(2.0 / math.pi) * np.sin(np.outer(x, j))
    T = spec.period
    cols = [np.full_like(t, 1.0 / math.sqrt(T))]
    c = math.sqrt(2.0 / T)
    for k in range(1, spec.K + 1):
        arg = k * spec.omega * t
        cols.append(c * np.cos(arg))
        cols.append(c * np.sin(arg))
    Tm = np.stack(cols, axis=1)
    S.setflags(write=False)
    Tm.setflags(write=False)
    return S, Tm


def basis_factors(spec: TruncationSpec) -> tuple[np.ndarray, np.ndarray]:
    """Spatial (Nx x J) and temporal (Nt x (2K+1)) normalized factor matrices."""
    return _factors(spec)


def synthesize(spec: TruncationSpec, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate a coefficient vector on the grid (Nx x Nt)."""
    S, Tm = _factors(spec)
    C = np.asarray(coeffs, dtype=float).reshape(spec.J, 2 * spec.K + 1)
    return S @ C @ Tm.T


def analyze(spec: TruncationSpec, values: np.ndarray) -> np.ndarray:
    """Quadrature projection of grid values onto the truncated basis."""
    values = np.asarray(values, dtype=float)
    if values.shape != (spec.Nx, spec.Nt):
        raise ValidationError(
            f"grid shape {values.shape} does not match (Nx, Nt)=({spec.Nx}, {spec.Nt})")
    S, Tm = _factors(spec)
    return (quadrature_weight(spec) * (S.T @ values @ Tm)).ravel()


@dataclass(frozen=True, eq=False)
class FourierField:
    spec: TruncationSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.shape != (self.spec.n_modes,):
            raise ValidationError(
                f"expected {self.spec.n_modes} coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, spec: TruncationSpec) -> "FourierField":
        return cls(spec, np.zeros(spec.n_modes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "FourierField") -> "FourierField":
        return FourierField(self.spec, self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierField") -> "FourierField":
        return FourierField(self.spec, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "FourierField":
        return FourierField(self.spec, c * self.coeffs)

    __rmul__ = __mul__


def to_grid(u: FourierField) -> np.ndarray:
    return synthesize(u.spec, u.coeffs)


def from_grid(v: np.ndarray, spec: TruncationSpec) -> FourierField:
    return FourierField(spec, analyze(spec, v))


def inner(u: FourierField, w: FourierField) -> float:
    """L^2 inner product; coefficient vectors are isometric to L^2."""
    return float(u.coeffs @ w.coeffs)


def grid_inner(spec: TruncationSpec, v: np.ndarray, w: np.ndarray) -> float:
    """Tensor-rule quadrature of v * w over [0, pi] x [0, T]."""
    return float(quadrature_weight(spec) * np.sum(v * w))
