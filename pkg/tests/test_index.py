import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relmorse.errors import DegenerateEndpointError, GapViolationError, HypothesisViolation, ValidationError
from relmorse.fourier import TruncationSpec, mesh
from relmorse.index import (IllConditionedNullity, gap_nondegeneracy_check, nullity, projection_index,
                            relative_morse_index, spectral_flow)
from relmorse.operators import TruncatedOperator, multiplication_operator, wave_operator

from conftest import random_orthonormal, random_symmetric

op = TruncatedOperator.abstract


def neg_count(M):
    return int(np.sum(np.linalg.eigvalsh(M) < 0))


def test_nullity_trivial():
    assert nullity(op(np.diag([-1.0, 1.0])), op(np.zeros((2, 2))), 1e-8) == 0


def test_nullity_wave_kernel():
    A = wave_operator(TruncationSpec(1, 1, 2, 2))
    # j = k in {1, 2}, cos and sin phases each
    assert nullity(A, A * 0.0, 1e-8) == 4


def test_nullity_near_window_warns():
    with pytest.warns(IllConditionedNullity):
        assert nullity(op(np.diag([0.5e-8])), op(np.zeros((1, 1))), 1e-8) == 1


def test_nullity_clean_no_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        nullity(op(np.diag([1.0, -2.0])), op(np.zeros((2, 2))), 1e-8)


def test_index_zero_perturbation():
    A = op(np.diag([-1.0, 0.0, 2.0]))
    pair = relative_morse_index(A, op(np.zeros((3, 3))))
    assert (pair.index, pair.nullity) == (0, 1)


def test_index_closed_form():
    pair = relative_morse_index(op(np.diag([1.0, -1.0])), op(2 * np.eye(2)))
    assert (pair.index, pair.nullity) == (1, 0)


def test_index_gap_violation():
    with pytest.raises(GapViolationError):
        relative_morse_index(op(np.diag([1.0, -1.0])), op(2 * np.eye(2)), gap=(-1.0, 1.0))


def test_index_monotone_in_wave_band(problems):
    prob = problems["ex_thm41"]
    s = prob.spec
    g1, g2 = prob.multiplication("g1"), prob.multiplication("g2")
    i1 = relative_morse_index(prob.A, g1)
    i2 = relative_morse_index(prob.A, g2)
    rng = np.random.default_rng(0)
    nl = prob.nonlinearity
    lo, hi = nl.field_grid("g1", s), nl.field_grid("g2", s)
    for _ in range(5):
        g = lo + (hi - lo) * rng.random((s.Nx, s.Nt))
        i = relative_morse_index(prob.A, multiplication_operator(g, s))
        assert i1.index <= i.index <= i2.index
    # eigen-count oracle: [alpha, beta] = [-0.55, -0.25] sits below sigma(A) = {-0.15 (x2), ...}
    assert i1.index == neg_count(prob.A.matrix - g1.matrix) - neg_count(prob.A.matrix) == -2


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_index_equals_count_difference(n, seed):
    rng = np.random.default_rng(seed)
    A, B = op(random_symmetric(rng, n)), op(random_symmetric(rng, n))
    pair = relative_morse_index(A, B)
    assert pair.index == neg_count((A - B).matrix) - neg_count(A.matrix)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_monotone_when_nondegenerate(n, seed):
    rng = np.random.default_rng(seed)
    A = op(random_symmetric(rng, n))
    B1 = op(random_symmetric(rng, n))
    C = rng.normal(size=(n, n))
    B2 = B1 + op(C @ C.T)
    p1 = relative_morse_index(A, B1)
    if p1.nullity == 0:
        assert p1.index <= relative_morse_index(A, B2).index


def test_projection_identity():
    V = random_orthonormal(np.random.default_rng(0), 6, 3)
    r = projection_index(V, V)
    assert (r.index, r.dim_kernel) == (0, 0)


def test_projection_dimension_count():
    e = np.eye(4)
    assert projection_index(e[:, :2], e[:, :1]).index == 1


def test_projection_generic_and_antisymmetric():
    rng = np.random.default_rng(5)
    V, W = random_orthonormal(rng, 12, 5), random_orthonormal(rng, 12, 3)
    assert projection_index(V, W).index == 2
    assert projection_index(W, V).index == -2
    r = projection_index(V, W)
    assert (r.dim_kernel, r.dim_cokernel) == (2, 0)


def test_projection_rejects_non_orthonormal():
    with pytest.raises(ValidationError):
        projection_index(np.array([[1.0], [1.0]]), np.eye(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1), st.data())
def test_projection_antisymmetry_property(n, seed, data):
    k1 = data.draw(st.integers(0, n))
    k2 = data.draw(st.integers(0, n))
    rng = np.random.default_rng(seed)
    V, W = random_orthonormal(rng, n, k1), random_orthonormal(rng, n, k2)
    assert projection_index(V, W).index == -projection_index(W, V).index


def test_flow_zero_path():
    A = op(np.diag([1.0, -2.0]))
    res = spectral_flow(A, op(np.zeros((2, 2))))
    assert res.flow == 0 and res.crossings == []


@pytest.mark.parametrize("steps", [1, 2, 7, 16])
def test_flow_scalar_closed_form(steps):
    res = spectral_flow(op([[1.0]]), op([[2.0]]), 0, 1, steps)
    assert res.flow == 1
    assert len(res.crossings) == 1
    assert res.crossings[0].t == pytest.approx(0.5, abs=1e-8)
    assert res.crossings[0].sign == 1


def test_flow_negative_crossing():
    res = spectral_flow(op([[-1.0]]), op([[-4.0]]))
    assert res.flow == -1
    assert res.crossings[0].t == pytest.approx(0.25, abs=1e-8)


def test_flow_degenerate_endpoint():
    with pytest.raises(DegenerateEndpointError):
        spectral_flow(op([[0.0]]), op([[1.0]]))


def test_flow_additivity_random():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 20:
        n = int(rng.integers(2, 15))
        A, B = op(random_symmetric(rng, n)), op(random_symmetric(rng, n))
        try:
            full = spectral_flow(A, B, 0, 1).flow
            left = spectral_flow(A, B, 0, 0.37).flow
            right = spectral_flow(A, B, 0.37, 1).flow
        except DegenerateEndpointError:
            continue
        assert full == left + right
        checked += 1


def test_flow_double_crossing_cancels():
    # branches 1 - 2t (down at 1/2) and -1 + 3t (up at 1/3)
    res = spectral_flow(op(np.diag([1.0, -1.0])), op(np.diag([2.0, -3.0])), 0, 1)
    assert res.flow == 0
    assert [(round(c.t, 8), c.sign) for c in res.crossings] == [(round(1 / 3, 8), -1), (0.5, 1)]


def test_gap_check_trivial():
    z = op(np.zeros((2, 2)))
    res = gap_nondegeneracy_check(op(np.diag([-1.0, 1.0])), z, z, samples=5)
    assert res.epsilon_estimate == pytest.approx(1.0)


def test_gap_check_wave_band(problems):
    prob = problems["ex_thm41"]
    res = gap_nondegeneracy_check(prob.A, prob.multiplication("g1"), prob.multiplication("g2"), 20, 0)
    al, be = prob.nonlinearity.params["alpha"], prob.nonlinearity.params["beta"]
    w = prob.A.eigenvalues
    dist = float(np.min(np.maximum(0, np.maximum(al - w, w - be))))
    assert res.epsilon_estimate >= dist - 1e-6


def test_gap_check_refuses_kernel():
    A = op(np.diag([1.0, -1.0]))
    with pytest.raises(HypothesisViolation) as exc:
        gap_nondegeneracy_check(A, op(np.diag([0.0, -1.5])), op(np.diag([0.0, -1.0])))
    assert exc.value.condition == "nu_A(B2)=0"


def test_gap_check_refuses_unordered_and_unequal():
    A = op(np.diag([1.0, -1.0]))
    with pytest.raises(HypothesisViolation):
        gap_nondegeneracy_check(A, op(np.eye(2)), op(np.zeros((2, 2))))
    with pytest.raises(HypothesisViolation):
        gap_nondegeneracy_check(A, op(np.zeros((2, 2))), op(2 * np.eye(2)))
