import json
from pathlib import Path

import numpy as np
import pytest

from relmorse.cli import _wave_problem
from relmorse.fourier import TruncationSpec
from relmorse.wave import WaveProblem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SHIPPED = ("ex_thm41", "ex_thm42_minus", "ex_thm43", "linear")


def load_config(name: str) -> dict:
    return json.loads((CONFIGS / f"{name}.json").read_text())


def shipped_problem(name: str, J: int | None = None, K: int | None = None) -> WaveProblem:
    cfg = load_config(name)
    if J is not None:
        cfg["problem"].update(J=J, K=K)
    return _wave_problem(cfg)


_cache = {}


@pytest.fixture(scope="session")
def problems():
    """Shipped example problems at their configured truncation (J = K = 8)."""
    if not _cache:
        for name in SHIPPED:
            _cache[name] = shipped_problem(name)
    return _cache


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric(rng, n, scale=1.0):
    M = rng.normal(size=(n, n)) * scale
    return 0.5 * (M + M.T)


def random_orthonormal(rng, n, k):
    Q, _ = np.linalg.qr(rng.normal(size=(n, max(k, 1))))
    return Q[:, :k]


@pytest.fixture
def small_spec():
    return TruncationSpec(1, 2, 4, 3)
