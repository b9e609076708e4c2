import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpuced import assemble_standard_form, relax_binaries
from mpuced.lp import (
    basis_active_set, extract_active_set, kkt_residuals, record_kkt, reduce_problem, solve_fixed,
)
from mpuced.random_cases import random_case

from conftest import sample_box


@pytest.fixture(scope="module")
def root51(form51):
    return relax_binaries(form51)


def test_root_at_origin(root51):
    sol = solve_fixed(root51, [0, 0])
    assert sol.status == "optimal"
    assert np.isclose(sol.objective, 85.6)
    assert np.allclose(sol.omega, [7, 8, 0.7, 0.8])
    # stationarity pins these values; see the notes on the printed ones
    assert np.allclose(sol.mu, [17, 0, 0, 0, 1.8, 1.5, 0, 0, 0, 0])
    assert np.allclose(sol.lam, [-18.4])
    act = extract_active_set(sol, root51)
    assert act.p1 == (0, 4, 5) and act.p2 == (0,) and not act.degeneracy_flag


def test_root_past_breakpoint(root51):
    sol = solve_fixed(root51, [0.5, 0])
    assert np.isclose(sol.objective, 80.5)
    assert np.allclose(sol.omega, [10, 5, 1, 0.5])
    assert np.allclose(sol.mu, [0, 0, 0, 0, 3.5, 1.5, 0, 0, 17, 0])
    assert np.allclose(sol.lam, [-6.5])
    assert extract_active_set(sol, root51).p1 == (4, 5, 8)


def test_breakpoint_dual_is_a_vertex(root51):
    # both dual vertices are optimal at theta_1 = 0.3
    sol = solve_fixed(root51, [0.3, 0])
    assert np.isclose(sol.objective, 80.5)
    options = [np.array([17, 0, 0, 0, 1.8, 1.5, 0, 0, 0, 0]), np.array([0, 0, 0, 0, 3.5, 1.5, 0, 0, 17, 0])]
    assert any(np.allclose(sol.mu, o) for o in options)


def test_fixed_binaries(form51):
    assert solve_fixed(form51, [0, 0], fixed={2: 0}).status == "infeasible"
    sol = solve_fixed(form51, [0, 0], fixed={2: 1, 3: 1})
    assert np.isclose(sol.objective, 94.0)
    assert np.isclose(solve_fixed(form51, [5, 0], fixed={2: 1, 3: 1}).objective, 88.0)


def test_infeasible_has_farkas(form51):
    sol = solve_fixed(form51, [0, 0], fixed={2: 0})
    y, z = sol.farkas
    red = reduce_problem(form51, {2: 0})
    assert np.all(y >= -1e-12)
    if red.infeasible_rows.size == 0:
        yr = y[red.rows]
        assert np.abs(yr @ red.A + z @ red.E).max() <= 1e-9
        assert yr @ red.r(np.zeros(2)) + z @ red.h < 0


def _cases():
    return [relax_binaries(assemble_standard_form(random_case(s))) for s in range(12)]


@pytest.fixture(scope="module")
def rand_forms():
    return _cases()


def test_kkt_and_duality(rand_forms, root51, formB):
    forms = rand_forms + [root51, relax_binaries(formB)]
    checked = 0
    for i, form in enumerate(forms):
        for theta in sample_box(form.theta_box, 8, i):
            sol = solve_fixed(form, theta)
            if sol.status != "optimal":
                continue
            res = kkt_residuals(sol, form)
            for key in ("stationarity", "primal_ineq", "primal_eq", "dual_sign", "complementarity"):
                assert res[key] <= 1e-7, (key, res)
            rhs = form.rhs(theta)
            dual = -sol.mu @ rhs - sol.lam @ form.h
            assert abs(form.M @ sol.omega - dual) <= 1e-6 * max(1.0, abs(dual))
            checked += 1
    assert checked > 50


def test_vertex_property(rand_forms, root51):
    for i, form in enumerate(rand_forms + [root51]):
        for theta in sample_box(form.theta_box, 5, 100 + i):
            sol = solve_fixed(form, theta)
            if sol.status != "optimal":
                continue
            act = extract_active_set(sol, form)
            red = reduce_problem(form, sol.fixed)
            assert len(act.p1) + len(act.p2) == red.free.size
            rows = np.array(act.p1, dtype=int)
            x = sol.omega
            assert np.allclose(form.A[rows] @ x, form.rhs(theta)[rows], atol=1e-8)
            eq = np.array(act.p2, dtype=int)
            assert np.allclose(form.H[eq] @ x, form.h[eq], atol=1e-8)
            # the basis rows are independent
            Ap = np.vstack([red.A[np.searchsorted(red.rows, rows)], red.E[eq]])
            assert np.linalg.matrix_rank(Ap) == red.free.size


def test_basis_active_set_is_valid(root51):
    sol = solve_fixed(root51, [0, 0])
    act = basis_active_set(sol, root51)
    assert len(act.p1) + len(act.p2) == 4


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 39), t=st.floats(0, 1))
def test_determinism(seed, t):
    form = relax_binaries(assemble_standard_form(random_case(seed)))
    box = np.asarray(form.theta_box)
    theta = box[:, 0] + t * (box[:, 1] - box[:, 0])
    a, b = solve_fixed(form, theta), solve_fixed(form, theta)
    assert a.status == b.status
    if a.status == "optimal":
        assert np.array_equal(a.omega, b.omega)
        assert extract_active_set(a, form) == extract_active_set(b, form)


def test_record_kkt_logs_solves(root51):
    with record_kkt() as log:
        solve_fixed(root51, [0, 0])
        solve_fixed(root51, [1, 0])
    assert len(log) == 2
