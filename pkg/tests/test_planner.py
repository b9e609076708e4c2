import numpy as np
import pytest

from mpuced import assemble_standard_form, relax_binaries
from mpuced.bnb import Incumbent, IncumbentPiece
from mpuced.mplp import ParamSpace, explore
from mpuced.planner import PlannerError, allocate_budget, rank_lines, recommendations
from mpuced.polytope import Polytope
from mpuced.random_cases import random_case

from conftest import grid_budget, sample_box

COSTS = np.array([10.0, 1.0])


def test_budget_examples(exact51):
    inc = exact51.incumbent
    plan = allocate_budget(inc, COSTS, 0.0)
    assert plan.objective == pytest.approx(94) and np.allclose(plan.theta_star, 0)
    plan = allocate_budget(inc, COSTS, 2.0)
    assert plan.objective == pytest.approx(90) and np.allclose(plan.theta_star, [0.2, 0])
    assert plan.binding and plan.spend == pytest.approx(2)
    assert list(plan.recommended) == [True, False]
    plan = allocate_budget(inc, COSTS, 100.0)
    assert plan.objective == pytest.approx(88) and np.allclose(plan.theta_star, [0.3, 0])
    assert not plan.binding


def test_budget_grid_on_incumbent(exact51):
    for budget in (0.0, 1.0, 2.0, 3.0, 50.0):
        plan = allocate_budget(exact51.incumbent, COSTS, budget)
        ref, _ = grid_budget(exact51.incumbent, COSTS, budget)
        assert plan.objective == pytest.approx(ref, abs=1e-6)


def test_budget_bounds(exact51):
    plan = allocate_budget(exact51.incumbent, COSTS, 100.0, bounds=[0.1, 10])
    assert plan.objective == pytest.approx(92) and plan.theta_star[0] == pytest.approx(0.1)


def test_budget_errors(exact51):
    with pytest.raises(PlannerError):
        allocate_budget(exact51.incumbent, [-1, 0], 1.0)
    with pytest.raises(PlannerError):
        allocate_budget(exact51.incumbent, COSTS, -1.0)


def _strips(seed):
    """Random piecewise function on [0, 10]^2 with strip boundaries on the grid."""
    rng = np.random.default_rng(seed)
    space = ParamSpace(box=np.array([[0.0, 10.0], [0.0, 10.0]]), free=np.array([0, 1]))
    cuts = np.concatenate([[0.0], np.sort(rng.choice(np.arange(1, 1000), size=3, replace=False)) / 100, [10.0]])
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        E = np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]])
        f = np.array([hi, -lo, 10.0, 0.0])
        P = -rng.integers(0, 30, size=2).astype(float)
        pieces.append(IncumbentPiece(Polytope(E, f), P, float(rng.integers(50, 150)), {}))
    return Incumbent(space, pieces), rng


@pytest.mark.parametrize("seed", range(10))
def test_budget_grid_oracle(seed):
    sol, rng = _strips(seed)
    costs = np.array([float(rng.choice([1, 2, 5])), 1.0])
    budget = float(rng.integers(0, 150)) / 10
    plan = allocate_budget(sol, costs, budget)
    ref, _ = grid_budget(sol, costs, budget)
    assert plan.objective == pytest.approx(ref, abs=1e-6)
    assert costs @ plan.theta_star <= budget + 1e-9


def test_budget_monotone():
    form = relax_binaries(assemble_standard_form(random_case(3)))
    sol = explore(form)
    costs = np.ones(form.K)
    objs = [allocate_budget(sol, costs, b).objective for b in np.linspace(0, 20, 21)]
    assert np.all(np.diff(objs) <= 1e-9)


def test_rank_examples(exact51):
    ranked = rank_lines(exact51.incumbent, [0.1, 0])
    assert [k for k, _ in ranked] == [0, 1]
    assert np.allclose([r for _, r in ranked], [20, 0])
    assert np.allclose([r for _, r in rank_lines(exact51.incumbent, [1.0, 0])], [0, 0])
    with pytest.raises(PlannerError):
        rank_lines(exact51.incumbent, [20.0, 0])


def test_rank_finite_differences():
    checked = 0
    for seed in range(8):
        form = relax_binaries(assemble_standard_form(random_case(seed)))
        sol = explore(form, seed=seed)
        box = np.asarray(form.theta_box, dtype=float)
        for theta in sample_box(box, 10, seed):
            idx = sol.locate(theta)
            if idx is None:
                continue
            rs = sol.regions[idx]
            for k, rate in rank_lines(sol, theta):
                if k not in sol.space.free:
                    assert rate == 0
                    continue
                h = 1e-4 * (box[k, 1] - box[k, 0])
                e = np.zeros(form.K)
                e[k] = h
                if not (rs.contains(theta + e, -1e-12) and rs.contains(theta - e, -1e-12)):
                    continue
                fd = (sol.value(theta + e) - sol.value(theta - e)) / (2 * h)
                assert rate == pytest.approx(-fd, abs=1e-5)
                checked += 1
    assert checked > 10


def test_rank_order_ties(exact51):
    # equal rates fall back to the line index
    assert [k for k, _ in rank_lines(exact51.incumbent, [5, 5])] == [0, 1]


def test_recommendations(exact51):
    assert recommendations(exact51.incumbent, COSTS) == [[True, False], [False, False]]
