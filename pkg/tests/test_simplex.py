import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from mpuced.simplex import solve_lp


def _random_lp(seed, m=12, n=5, me=1):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x0 = rng.standard_normal(n)
    r = A @ x0 + rng.random(m)  # x0 strictly feasible
    E = rng.standard_normal((me, n))
    h = E @ x0
    # bounded: a box around the origin
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    r = np.concatenate([r, np.full(n, 10 + np.abs(x0).max()), np.full(n, 10 + np.abs(x0).max())])
    c = rng.standard_normal(n)
    return c, A, r, E, h


def _highs(c, A, r, E, h):
    return linprog(c, A_ub=A, b_ub=r, A_eq=E, b_eq=h, bounds=[(None, None)] * c.size, method="highs")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_matches_highs(seed):
    c, A, r, E, h = _random_lp(seed)
    ref = _highs(c, A, r, E, h)
    res = solve_lp(c, A, r, E, h)
    assert res.status == "optimal" and ref.status == 0
    assert abs(res.objective - ref.fun) <= 1e-7 * max(1.0, abs(ref.fun))
    assert np.max(A @ res.x - r) <= 1e-8
    assert np.all(res.mu >= -1e-12)
    assert np.allclose(c + A.T @ res.mu + E.T @ res.lam, 0, atol=1e-8)


def test_infeasible_with_farkas():
    # x <= 1 and x >= 2
    A = np.array([[1.0], [-1.0]])
    r = np.array([1.0, -2.0])
    res = solve_lp(np.array([1.0]), A, r)
    assert res.status == "infeasible"
    y, z = res.farkas
    assert np.all(y >= 0)
    assert np.allclose(y @ A, 0)
    assert y @ r < 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_farkas_certificates(seed):
    rng = np.random.default_rng(seed)
    n = 4
    A = rng.standard_normal((8, n))
    x0 = rng.standard_normal(n)
    r = A @ x0 + rng.random(8)
    # cut off: a >= t and a <= t - 1 along a random direction
    a = rng.standard_normal(n)
    A = np.vstack([A, a, -a])
    r = np.concatenate([r, [a @ x0 - 0.5], [-(a @ x0) - 0.0]])
    res = solve_lp(rng.standard_normal(n), A, r)
    assert res.status == "infeasible"
    y, z = res.farkas
    assert np.all(y >= -1e-12)
    assert np.abs(y @ A).max() <= 1e-8 * max(1.0, np.abs(y).max())
    assert y @ r < 0


def test_unbounded():
    A = np.array([[-1.0, 0.0], [0.0, -1.0]])
    res = solve_lp(np.array([-1.0, 0.0]), A, np.zeros(2))
    assert res.status == "unbounded"


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_warm_start_same_optimum(seed):
    c, A, r, E, h = _random_lp(seed)
    cold = solve_lp(c, A, r, E, h)
    # shift the rhs a little and restart from the previous basis
    r2 = r + 0.01 * np.random.default_rng(seed + 1).random(r.size)
    warm = solve_lp(c, A, r2, E, h, basis_hint=cold.basis)
    ref = solve_lp(c, A, r2, E, h)
    assert warm.status == ref.status == "optimal"
    assert abs(warm.objective - ref.objective) <= 1e-8 * max(1.0, abs(ref.objective))


def test_degenerate_vertex():
    # three constraints through the optimum in the plane
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    r = np.array([1.0, 1.0, 2.0, 0.0, 0.0])
    res = solve_lp(np.array([-1.0, -1.0]), A, r)
    assert res.status == "optimal"
    assert np.allclose(res.x, [1, 1])
    assert np.isclose(res.objective, -2)
    assert np.allclose(np.array([-1.0, -1.0]) + A.T @ res.mu, 0)


def test_sparse_path_agrees():
    rng = np.random.default_rng(3)
    m, n = 400, 60
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.05)
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    r = np.concatenate([rng.random(m) + 0.1, np.ones(n), np.ones(n)])
    c = rng.standard_normal(n)
    assert A.size >= 20000
    res = solve_lp(c, A, r)
    ref = _highs(c, A, r, np.zeros((0, n)), np.zeros(0))
    assert abs(res.objective - ref.fun) <= 1e-7 * max(1.0, abs(ref.fun))
