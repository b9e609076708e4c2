import numpy as np
import pytest

from mpuced import assemble_standard_form, relax_binaries
from mpuced import polytope as pt
from mpuced.lp import solve_fixed
from mpuced.mplp import explore, value_gradient, value_gradient_rows
from mpuced.random_cases import random_case

from conftest import sample_box


@pytest.fixture(scope="module")
def root51(form51):
    form = relax_binaries(form51)
    return form, explore(form)


@pytest.fixture(scope="module")
def rootB(formB):
    form = relax_binaries(formB)
    return form, explore(form)


@pytest.fixture(scope="module")
def random_roots():
    out = []
    for seed in range(10):
        form = relax_binaries(assemble_standard_form(random_case(seed)))
        out.append((form, explore(form, seed=seed)))
    return out


def test_root51_pieces(root51):
    _, sol = root51
    first, second = sol.regions
    assert np.allclose(first.value_P, [-17, 0]) and np.isclose(first.value_w, 85.6)
    assert np.allclose(second.value_P, [0, 0]) and np.isclose(second.value_w, 80.5)
    assert first.contains([0.3 - 1e-9, 5]) and not first.contains([0.31, 5])
    assert second.contains([0.3, 0]) and second.contains([10, 10])


def test_root51_gradients(root51):
    form, sol = root51
    first, second = sol.regions
    assert value_gradient(first, 0) == pytest.approx(-17) and value_gradient(first, 1) == 0
    assert value_gradient(second, 0) == 0 and value_gradient(second, 1) == 0
    for rs in sol.regions:
        for k in range(2):
            assert value_gradient_rows(form, rs, k) == pytest.approx(value_gradient(rs, k), abs=1e-9)
    with pytest.raises(IndexError):
        value_gradient(first, 2)


def test_root51_affine_solution(root51):
    form, sol = root51
    first = sol.regions[0]
    assert np.allclose(first.omega([0, 0]), [7, 8, 0.7, 0.8])
    assert np.allclose(first.omega([0.2, 3]), solve_fixed(form, [0.2, 3]).omega)


def test_rootB_regions(rootB):
    _, sol = rootB
    slopes = [rs.value_P[0] for rs in sol.regions]
    assert np.allclose(slopes, [-10.5, -10, -9.5, 0])
    ends = sorted(float(pt.affine_range(rs.region, [1.0])[1]) for rs in sol.regions)
    assert np.allclose(ends, [0.2, 0.4, 1.2, 10])
    assert np.allclose([rs.value_w for rs in sol.regions], [254.1, 254.0, 253.8, 242.4])


def _fd(sol, theta, k, h):
    e = np.zeros_like(theta)
    e[k] = h
    return (sol.value(theta + e) - sol.value(theta - e)) / (2 * h)


def test_finite_differences(root51, rootB, random_roots):
    for form, sol in [root51, rootB] + random_roots:
        box = np.asarray(form.theta_box, dtype=float)
        for theta in sample_box(box, 20, 7):
            idx = sol.locate(theta)
            if idx is None:
                continue
            rs = sol.regions[idx]
            for k in sol.space.free:
                h = 1e-4 * (box[k, 1] - box[k, 0])
                if not (rs.contains(theta + h * np.eye(box.shape[0])[k], -1e-12) and rs.contains(theta - h * np.eye(box.shape[0])[k], -1e-12)):
                    continue
                assert _fd(sol, theta, k, h) == pytest.approx(value_gradient(rs, k), abs=1e-5)


def test_pointwise_agreement(root51, rootB, random_roots):
    for i, (form, sol) in enumerate([root51, rootB] + random_roots):
        for theta in sample_box(form.theta_box, 100, i):
            ref = solve_fixed(form, theta)
            if ref.status == "optimal":
                assert sol.value(theta) == pytest.approx(ref.objective, abs=1e-6)
            else:
                assert sol.locate(theta) is None


def test_coverage(root51, random_roots):
    for i, (form, sol) in enumerate([root51] + random_roots):
        for theta in sample_box(form.theta_box, 100, 50 + i):
            if sol.locate(theta) is None:
                assert sol.is_uncovered(theta, 1e-7)
            if sol.is_uncovered(theta, -1e-7):
                assert solve_fixed(form, theta).status == "infeasible"


def test_convex_and_non_increasing(root51, rootB, random_roots):
    rng = np.random.default_rng(0)
    for form, sol in [root51, rootB] + random_roots:
        for rs in sol.regions:
            assert np.all(rs.value_P <= 1e-9)
        if not sol.regions:
            continue
        box = np.asarray(form.theta_box, dtype=float)
        for _ in range(10):
            a, b = sample_box(box, 2, int(rng.integers(1 << 30)))
            s = np.linspace(0, 1, 21)
            vals = np.array([sol.value(a + t * (b - a)) for t in s])
            if not np.all(np.isfinite(vals)):
                continue
            # second differences of a convex function are non-negative
            assert np.all(vals[:-2] - 2 * vals[1:-1] + vals[2:] >= -1e-6)


def test_uncovered_certifies_infeasibility():
    # demand beyond a fixed line limit becomes infeasible at small theta
    for seed in range(40):
        form = relax_binaries(assemble_standard_form(random_case(seed)))
        sol = explore(form, seed=seed)
        if sol.uncovered:
            break
    else:
        pytest.skip("no random case with uncovered parameters")
    for U in sol.uncovered:
        c, r = pt.chebyshev(U)
        if r > 1e-6:
            assert solve_fixed(form, sol.space.to_full(c)).status == "infeasible"


def test_explore_deterministic(rootB, formB):
    again = explore(relax_binaries(formB))
    assert [rs.key for rs in again.regions] == [rs.key for rs in rootB[1].regions]
