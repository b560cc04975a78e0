import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from relmorse.errors import BoundednessViolation, NoConvergence, NonContractionError, ValidationError
from relmorse.operators import TruncatedOperator
from relmorse.reduction import (NonlinearMap, ReducedProblem, choose_threshold, find_critical_points,
                                fixed_point_z, homotopy_solve, reduced_gradient, reduced_value,
                                regularized_solve)

from conftest import random_symmetric

op = TruncatedOperator.abstract


def rotated(rng, eigs):
    Q, _ = np.linalg.qr(rng.normal(size=(len(eigs), len(eigs))))
    return op(Q @ np.diag(eigs) @ Q.T)


EIGS = [-5.0, -3.0, -0.5, 0.2, 0.3, 2.5, 3.0, 6.0]


def tanh_map(beta, gamma, h=None):
    """F'(z) = beta z - gamma tanh(z) + h, Lipschitz constant max(|beta - gamma|, |beta|)."""
    h = 0.0 if h is None else h
    return NonlinearMap(lambda z: beta * z - gamma * np.tanh(z) + h,
                        lambda z: float(0.5 * beta * z @ z - gamma * np.sum(np.logaddexp(z, -z) - math.log(2))
                                        + np.sum(h * z)),
                        max(abs(beta - gamma), abs(beta)))


def test_zero_map_gives_zero_outer():
    rng = np.random.default_rng(0)
    prob = ReducedProblem.build(rotated(rng, EIGS), NonlinearMap.zero(), 1.0)
    zs = fixed_point_z(prob, rng.normal(size=prob.dim0))
    assert np.all(zs.zplus == 0) and np.all(zs.zminus == 0)


def test_linear_map_matches_block_solve():
    rng = np.random.default_rng(1)
    A = rotated(rng, EIGS)
    Bm = random_symmetric(rng, len(EIGS))
    Bm *= 0.8 / np.linalg.norm(Bm, 2)
    prob = ReducedProblem.build(A, NonlinearMap.linear(op(Bm)), 1.0)
    _, _, Qo, wo, _ = prob._blocks
    for _ in range(5):
        x = rng.normal(size=prob.dim0)
        zs = fixed_point_z(prob, x)
        # (Lambda - Qo^T B Qo) w = Qo^T B Q0 x
        w = np.linalg.solve(np.diag(wo) - Qo.T @ Bm @ Qo, Qo.T @ Bm @ prob.embed(x))
        np.testing.assert_allclose(zs.zplus + zs.zminus, Qo @ w, atol=1e-10)


def test_apriori_and_lipschitz_bounds():
    rng = np.random.default_rng(2)
    A = rotated(rng, EIGS)
    h = rng.normal(size=len(EIGS))
    prob = ReducedProblem.build(A, tanh_map(0.4, 0.3, h), 1.0)
    lF, l = prob.F.lipschitz_bound, prob.l
    c = lF / (l - lF)
    origin = np.linalg.norm(prob.F.apply(np.zeros(len(EIGS))))
    for _ in range(100):
        x = rng.normal(scale=3, size=prob.dim0)
        dx = rng.normal(scale=rng.uniform(0.01, 3), size=prob.dim0)
        a, b = fixed_point_z(prob, x), fixed_point_z(prob, x + dx)
        for za, zb in ((a.zplus, b.zplus), (a.zminus, b.zminus)):
            assert np.linalg.norm(zb - za) <= c * np.linalg.norm(dx) + 1e-8
            assert np.linalg.norm(za) <= c * np.linalg.norm(x) + origin / (l - lF) + 1e-8


def test_contraction_ratios_and_iteration_bound():
    rng = np.random.default_rng(3)
    prob = ReducedProblem.build(rotated(rng, EIGS), tanh_map(0.4, 0.3, 0.5), 1.0)
    zs = fixed_point_z(prob, rng.normal(size=prob.dim0))
    assert zs.iterations <= prob.max_iter
    assert zs.ratios and max(zs.ratios[1:]) <= prob.rate + 0.05


def test_underestimated_lipschitz_fails_to_contract():
    A = op(np.diag([-2.0, 0.1, 2.0]))
    F = NonlinearMap(lambda z: 3.0 * z + 1.0, lambda z: 1.5 * float(z @ z) + float(np.sum(z)), 0.5)
    prob = ReducedProblem(A, ReducedProblem.build(A, F, 1.0).split, F, max_iter=200)
    with pytest.raises(NonContractionError), np.errstate(all="ignore"):
        fixed_point_z(prob, np.array([1.0]))


def test_construction_checks():
    A = op(np.diag([-2.0, 0.1, 2.0]))
    F = NonlinearMap.linear(op(0.5 * np.eye(3)))
    with pytest.raises(ValidationError):
        ReducedProblem.build(A, F, 0.4)           # l <= l_F
    with pytest.raises(ValidationError):
        ReducedProblem.build(A, F, 1.0, gap_radius=0.9)
    with pytest.raises(ValueError):
        ReducedProblem.build(A, F, 2.0)           # on the spectrum


def test_choose_threshold_first_gap():
    assert choose_threshold(np.array([-3.0, -0.5, 0.1, 2.0]), 0.6) == pytest.approx(1.3)
    assert choose_threshold(np.array([-3.0, 0.1, 2.0]), 0.6, upper=1.0) == pytest.approx(0.8)


def test_quadratic_value_zero_map():
    A = op(np.diag([-4.0, 0.3, 5.0]))
    prob = ReducedProblem.build(A, NonlinearMap.zero(), 1.0)
    assert prob.dim0 == 1
    assert reduced_value(prob, np.array([2.0])) == pytest.approx(0.5 * 0.3 * 4.0)
    np.testing.assert_allclose(reduced_gradient(prob, np.array([2.0])), [0.6])


def test_quadratic_value_linear_oracle():
    rng = np.random.default_rng(4)
    A = rotated(rng, EIGS)
    Bm = random_symmetric(rng, len(EIGS))
    Bm *= 0.7 / np.linalg.norm(Bm, 2)
    prob = ReducedProblem.build(A, NonlinearMap.linear(op(Bm)), 1.0)
    _, _, Qo, wo, _ = prob._blocks
    for _ in range(10):
        x = rng.normal(size=prob.dim0)
        w = np.linalg.solve(np.diag(wo) - Qo.T @ Bm @ Qo, Qo.T @ Bm @ prob.embed(x))
        z = prob.embed(x) + Qo @ w
        expected = 0.5 * z @ (A.matrix - Bm) @ z
        assert reduced_value(prob, x) == pytest.approx(expected, abs=1e-9)


def test_value_independent_of_initial_iterate():
    rng = np.random.default_rng(5)
    prob = ReducedProblem.build(rotated(rng, EIGS), tanh_map(0.4, 0.3, 0.2), 1.0)
    x = rng.normal(size=prob.dim0)
    v0 = reduced_value(prob, x)
    for _ in range(3):
        assert reduced_value(prob, x, initial=rng.normal(scale=10, size=len(EIGS))) == pytest.approx(v0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    prob = ReducedProblem.build(rotated(rng, EIGS), tanh_map(0.4, 0.3, rng.normal(size=len(EIGS))), 1.0)
    x = rng.normal(scale=2, size=prob.dim0)
    g = reduced_gradient(prob, x)
    h = 1e-5
    fd = np.array([(reduced_value(prob, x + h * e) - reduced_value(prob, x - h * e)) / (2 * h)
                   for e in np.eye(prob.dim0)])
    assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_quadratic_has_single_critical_point():
    rng = np.random.default_rng(6)
    A = rotated(rng, EIGS)
    prob = ReducedProblem.build(A, NonlinearMap.linear(op(0.1 * np.eye(len(EIGS)))), 1.0)
    pts = find_critical_points(prob, "multistart_newton", seed=0)
    assert len(pts) == 1
    assert np.linalg.norm(pts[0].z) < 1e-10


def _double_hump():
    # H0 = span(e1) with eigenvalue 0.2; a(x) = 0.1 x^2 - 0.2 x^2 + 0.3 log cosh x
    A = op(np.diag([0.2, 2.0, -3.0, 5.0]))
    return ReducedProblem.build(A, tanh_map(0.4, 0.3), 1.0)


@pytest.mark.parametrize("strategy", ["multistart_newton", "maximize"])
def test_double_hump_critical_points(strategy):
    prob = _double_hump()
    pts = find_critical_points(prob, strategy, seed=0)
    # a'(x) = -0.2 x + 0.3 tanh x; root oracle
    xs = brentq(lambda x: -0.2 * x + 0.3 * math.tanh(x), 0.5, 5.0)
    found = sorted(float(p.x[0]) * np.sign(prob.Q0[0, 0]) for p in pts)
    if strategy == "multistart_newton":
        assert found == pytest.approx([-xs, 0.0, xs], abs=1e-8)
    else:
        assert [-xs, xs] == pytest.approx([f for f in found if abs(f) > 1e-6], abs=1e-8)
    for p in pts:
        assert p.grad_norm <= 1e-8
        assert p.residual <= 1e-7
        assert p.hessian_signature == ((1, 0, 0) if abs(p.x[0]) > 1e-6 else (0, 0, 1))


def test_morse_identity_on_smooth_example():
    prob = _double_hump()
    pts = find_critical_points(prob, "multistart_newton", seed=0)
    zero = next(p for p in pts if abs(p.x[0]) < 1e-6)
    top = next(p for p in pts if abs(p.x[0]) > 1e-6)

    def istar(z):
        F2 = np.diag(0.4 - 0.3 / np.cosh(z) ** 2)
        neg = lambda M: int(np.sum(np.linalg.eigvalsh(M) < 0))
        return neg(prob.A.matrix - F2) - neg(prob.A.matrix)

    assert top.hessian_signature[0] - zero.hessian_signature[0] == istar(top.z) - istar(zero.z)


def test_results_sorted_and_deduplicated():
    pts = find_critical_points(_double_hump(), "multistart_newton", seed=3)
    vals = [p.value for p in pts]
    assert vals == sorted(vals)
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            assert np.linalg.norm(p.x - q.x) > 1e-4


def test_budget_exhaustion_returns_empty(caplog):
    pts = find_critical_points(_double_hump(), "multistart_newton", budget=1)
    assert pts == []
    assert "budget" in caplog.text


def test_regularized_zero_remainder():
    A = op(np.diag([-1.0, 0.5, 2.0]))
    res = regularized_solve(A, op(np.zeros((3, 3))), NonlinearMap.zero(), [1e-1, 1e-2, 1e-3])
    assert all(np.linalg.norm(z) == 0 for z in res.solutions)
    assert np.linalg.norm(res.limit) == 0 and res.cauchy


def test_regularized_scalar_kernel():
    A = op([[1.0]])
    r = NonlinearMap(lambda z: -np.arctan(z) + 0.3,
                     lambda z: float(-(z[0] * np.arctan(z[0]) - 0.5 * np.log1p(z[0] ** 2)) + 0.3 * z[0]), 1.0)
    res = regularized_solve(A, A, r, [1e-1, 1e-2, 1e-3, 1e-4])
    root = math.tan(0.3)
    assert res.cauchy
    assert all(b < a for a, b in zip(res.distances, res.distances[1:]))
    assert abs(res.solutions[-1][0] - root) < abs(res.solutions[0][0] - root)
    assert res.limit[0] == pytest.approx(root, abs=1e-10)
    assert res.limit_residual <= 1e-12


def test_regularized_kernel_divergence():
    A = op([[1.0]])
    r = NonlinearMap(lambda z: np.ones_like(z), lambda z: float(np.sum(z)), 0.0)
    with pytest.raises(NoConvergence):
        regularized_solve(A, A, r, [1e-1, 1e-2, 1e-3, 1e-4], ceiling=1e3)


def test_regularized_eps_outside_gap():
    A = op(np.diag([0.0, 0.05]))
    with pytest.raises(ValidationError):
        regularized_solve(A, op(np.zeros((2, 2))), NonlinearMap.zero(), [0.1, 0.01])


def test_homotopy_constant_path():
    rng = np.random.default_rng(7)
    A = rotated(rng, EIGS)
    B1 = op(0.25 * np.eye(len(EIGS)))
    res = homotopy_solve(A, B1, NonlinearMap.linear(B1))
    assert len(res.lambdas) == 21
    assert max(np.linalg.norm(z) for z in res.solutions) < 1e-12


def test_homotopy_linear_path_matches_direct_solves():
    rng = np.random.default_rng(8)
    A = rotated(rng, EIGS)
    B1 = op(0.1 * np.eye(len(EIGS)))
    B2 = op(np.diag([0.15, -0.1, 0.05, 0.12, 0.0, 0.1, -0.05, 0.02]))
    h = rng.normal(size=len(EIGS))
    res = homotopy_solve(A, B1, NonlinearMap.linear(B2, h))
    for lam, z in zip(res.lambdas, res.solutions):
        direct = np.linalg.solve(A.matrix - (1 - lam) * B1.matrix - lam * B2.matrix, lam * h)
        np.testing.assert_allclose(z, direct, atol=1e-8)
    np.testing.assert_allclose(res.final.z, np.linalg.solve((A - B2).matrix, h), atol=1e-8)


def test_homotopy_refuses_degenerate_start():
    A = op(np.diag([0.5, 2.0]))
    with pytest.raises(Exception) as exc:
        homotopy_solve(A, op(np.diag([0.5, 0.0])), NonlinearMap.zero())
    assert "nullity" in str(exc.value)


def test_homotopy_escape_is_reported():
    # A - lam B2 is singular at lam = 1/2: the path blows up
    A = op(np.diag([0.2, 3.0]))
    B2 = op(np.diag([0.4, 0.0]))
    with pytest.raises(BoundednessViolation):
        homotopy_solve(A, op(np.zeros((2, 2))), NonlinearMap.linear(B2, np.array([1.0, 0.0])),
                       radius=1e3, max_halvings=4)
