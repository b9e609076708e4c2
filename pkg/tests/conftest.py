import json

import numpy as np
import pytest

from mpuced import assemble_standard_form, load_bundled, relax_binaries
from mpuced.bnb import solve_mpmilp
from mpuced.case import bundled_case_path


@pytest.fixture(scope="session")
def form51():
    return assemble_standard_form(load_bundled("case_5_1"))


@pytest.fixture(scope="session")
def formB():
    return assemble_standard_form(load_bundled("case_appendix_b"))


@pytest.fixture(scope="session")
def exact51(form51):
    return solve_mpmilp(form51, alpha=0.0)


@pytest.fixture(scope="session")
def exactB(formB):
    return solve_mpmilp(formB, alpha=0.0)


@pytest.fixture(scope="session")
def synth_form():
    return assemble_standard_form(load_bundled("case_synth_5bus_24"))


@pytest.fixture(scope="session")
def synth_result(synth_form):
    return solve_mpmilp(synth_form, alpha=0.01, xi=0.0, Q=50, seed=0, max_nodes=1)


@pytest.fixture
def infeasible_case(tmp_path):
    data = json.loads(bundled_case_path("case_5_1").read_text())
    data["D"] = [[30.0], [30.0]]  # more than both generators can make
    path = tmp_path / "infeasible_case.json"
    path.write_text(json.dumps(data))
    return path


def relaxed(form):
    return relax_binaries(form)


def sample_box(box, n, seed):
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    return box[:, 0] + rng.random((n, box.shape[0])) * (box[:, 1] - box[:, 0])


def grid_budget(sol, costs, budget, steps=1000):
    """Dense grid search for the budget problem: (objective, theta)."""
    from mpuced.planner import pieces_of

    space = sol.space
    box = space.box
    axes = [np.linspace(lo, hi, steps + 1) if hi > lo else np.array([lo]) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    theta = np.stack([m.ravel() for m in mesh], axis=1)
    theta = theta[theta @ np.asarray(costs, dtype=float) <= budget + 1e-9]
    y = theta[:, space.free]
    best = np.full(theta.shape[0], np.inf)
    for P, w, region in pieces_of(sol):
        inside = np.all(y @ region.E.T <= region.f + 1e-9, axis=1)
        best = np.where(inside, np.minimum(best, theta @ P + w), best)
    k = int(np.argmin(best))
    return float(best[k]), theta[k]
