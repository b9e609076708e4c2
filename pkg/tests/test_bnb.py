import json

import numpy as np
import pytest

from mpuced import assemble_standard_form, relax_binaries
from mpuced import polytope as pt
from mpuced.case import bundled_case_path, case_from_dict
from mpuced.bnb import (
    BnbNode, Incumbent, IncumbentPiece, branch, gap_estimate, merge_incumbent,
    node_upper_bound, prune_and_merge, round_and_repair, solve_mpmilp,
)
from mpuced.lp import solve_fixed
from mpuced.mplp import ParamSpace, explore
from mpuced.oracle import BruteForce
from mpuced.random_cases import random_case

from conftest import sample_box

# U columns of the three-period case in branching order U11, U21, U12, U22, U13, U23
U_ORDER = [6, 9, 7, 10, 8, 11]


@pytest.fixture(scope="module")
def root51(form51):
    return explore(relax_binaries(form51))


@pytest.fixture(scope="module")
def rootB(formB):
    return explore(relax_binaries(formB))


def _values(sol, pts):
    return np.array([sol.value(t) for t in pts])


def test_round_and_repair_examples(form51, formB, root51, rootB):
    for rs in root51.regions:
        assert round_and_repair(rs, form51, 0.5) == {2: 1.0, 3: 1.0}
    ones = {j: 1.0 for j in U_ORDER}
    for rs in rootB.regions:
        UV = round_and_repair(rs, formB, 0.5)
        assert {j: UV[j] for j in U_ORDER} == ones
        assert all(UV[j] == 0.0 for j in formB.v_idx.ravel())
    with pytest.raises(ValueError):
        round_and_repair(root51.regions[0], form51, 1.5)


def test_round_all_zero(formB, rootB):
    rs = rootB.regions[0]
    UV = round_and_repair(rs, formB, 1.0 + 0.0)  # U* <= 0.6 everywhere
    assert all(UV[j] == 0.0 for j in U_ORDER)


def test_node_upper_bound_examples(form51, formB):
    sol = node_upper_bound(form51, {2: 1.0, 3: 1.0})
    got = [(tuple(rs.value_P), rs.value_w) for rs in sol.regions]
    assert np.allclose(got[0][0], (-20, 0)) and np.isclose(got[0][1], 94)
    assert np.allclose(got[1][0], (0, 0)) and np.isclose(got[1][1], 88)
    assert not node_upper_bound(form51, {2: 1.0, 3: 0.0}).regions
    UV = {j: 1.0 for j in U_ORDER} | {int(j): 0.0 for j in formB.v_idx.ravel()}
    solB = node_upper_bound(formB, UV)
    assert np.allclose([rs.value_w for rs in solB.regions], [257, 245])
    assert np.allclose([rs.value_P[0] for rs in solB.regions], [-10, 0])


def test_gap_estimate_examples(root51, rootB, exact51, exactB):
    d, flagged = gap_estimate(rootB, exactB.incumbent, rootB.regions[3].region, 50, 0)
    assert d == pytest.approx((245 - 242.4) / 242.4, abs=1e-9) and not flagged
    d, _ = gap_estimate(root51, exact51.incumbent, root51.regions[0].region, 50, 0)
    assert 0.093 <= d <= 0.099
    assert gap_estimate(root51, root51, root51.regions[1].region, 10, 3)[0] == 0
    with pytest.raises(ValueError):
        gap_estimate(root51, root51, root51.regions[1].region, 0, 3)


def test_gap_estimate_guard():
    space = ParamSpace(box=np.array([[0.0, 1.0]]), free=np.array([0]))
    zero = Incumbent(space, [IncumbentPiece(space.polytope(), np.zeros(1), 0.0, {})])
    one = Incumbent(space, [IncumbentPiece(space.polytope(), np.zeros(1), 1.0, {})])
    d, flagged = gap_estimate(zero, one, space.polytope(), 5, 0)
    assert flagged and d == pytest.approx(1.0)


def test_branch():
    node = BnbNode(0, {}, [pt.box_polytope([0], [1])])
    counter = [0]
    one, zero = branch(node, 6, counter)
    assert one.fixed == {6: 1.0} and zero.fixed == {6: 0.0}
    assert (one.id, zero.id) == (1, 2) and counter == [2]
    assert one.unexplored == node.unexplored
    with pytest.raises(ValueError):
        branch(one, 6, counter)


def test_prune_keeps_lower_node(form51, exact51):
    # node y1 = 1 has lower 91 - 35 theta_1 on [0, 0.3], below 94 - 20 theta_1
    node = explore(relax_binaries(form51), {2: 1.0})
    inc = Incumbent(exact51.incumbent.space, list(exact51.incumbent.pieces))
    _, surviving = prune_and_merge(node, inc)
    kept = [s for s, rs in surviving if np.isclose(rs.value_w, 91)]
    assert kept and pt.union_covers(node.regions[0].region, kept)
    # 80.5 < 88 on the second region as well
    assert any(np.isclose(rs.value_w, 80.5) for _, rs in surviving)


def test_prune_dominated(form51, exact51):
    node = node_upper_bound(form51, {2: 1.0, 3: 1.0})
    inc = Incumbent(exact51.incumbent.space, list(exact51.incumbent.pieces))
    _, surviving = prune_and_merge(node, inc)
    assert surviving == []


def test_merge_is_pointwise_min():
    space = ParamSpace(box=np.array([[0.0, 10.0]]), free=np.array([0]))
    box = space.polytope()
    inc = Incumbent(space)
    merge_incumbent(inc, [IncumbentPiece(box, np.array([-1.0]), 10.0, {"a": 1})])
    pts = np.linspace(0, 10, 41)[:, None]
    before = np.array([inc.value(t) for t in pts])
    merge_incumbent(inc, [IncumbentPiece(box, np.array([0.0]), 6.0, {"b": 1})])
    after = np.array([inc.value(t) for t in pts])
    assert np.all(after <= before + 1e-12)
    assert np.allclose(after, np.minimum(10 - pts[:, 0], 6))
    assert inc.pieces[inc.locate([2.0])].witness == {"b": 1}
    assert inc.pieces[inc.locate([8.0])].witness == {"a": 1}


def test_exact_single_period(exact51):
    pieces = exact51.pieces
    assert len(pieces) == 2
    assert np.allclose(pieces[0].P, [-20, 0]) and pieces[0].w == pytest.approx(94)
    assert np.allclose(pieces[1].P, [0, 0]) and pieces[1].w == pytest.approx(88)
    assert pieces[0].witness == pieces[1].witness == {2: 1.0, 3: 1.0}
    assert pt.affine_range(pieces[0].region, [1.0, 0.0])[1] == pytest.approx(0.3)


def test_exact_three_period(exactB):
    pieces = exactB.pieces
    assert np.allclose([p.P[0] for p in pieces], [-10, 0])
    assert np.allclose([p.w for p in pieces], [257, 245])
    assert pt.affine_range(pieces[0].region, [1.0])[1] == pytest.approx(1.2)


def test_table_nodes(formB):
    rform = relax_binaries(formB)
    expect = [
        [(-10.5, 254.6), (-10, 254.5), (0, 242.5)],
        [(-10, 255), (0, 243)],
        [(-10, 255.5), (0, 243.5)],
        [(-10, 256), (0, 244)],
        [(-10, 256.5), (0, 244.5)],
        [(-10, 257), (0, 245)],
    ]
    pts = np.column_stack([np.linspace(0, 10, 51), np.zeros(51)])
    for k, pieces in enumerate(expect, start=1):
        sol = explore(rform, {j: 1.0 for j in U_ORDER[:k]})
        assert not sol.uncovered
        want = np.max([P * pts[:, 0] + w for P, w in pieces], axis=0)
        assert np.allclose(_values(sol, pts), want, atol=1e-6)
    assert not explore(rform, {U_ORDER[0]: 0.0}).regions


def test_partially_infeasible_node(formB):
    # U21 = 0 after U11 = 1: feasible only above theta_1 = 1.2
    sol = explore(relax_binaries(formB), {6: 1.0, 9: 0.0})
    assert [rs.value_w for rs in sol.regions] == pytest.approx([249])
    assert solve_fixed(relax_binaries(formB), [1.0, 0], {6: 1.0, 9: 0.0}).status == "infeasible"


def test_alpha_stops_at_root(form51):
    res = solve_mpmilp(form51, alpha=0.1, xi=0.5, Q=50)
    assert res.certificate.node_count == 1 and res.certificate.termination == "gap"
    assert np.allclose([p.w for p in res.pieces], [94, 88])
    assert res.certificate.max_delta == pytest.approx(0.0956, abs=3e-3)


def test_infeasible_case():
    data = json.loads(bundled_case_path("case_5_1").read_text())
    data["D"] = [[30.0], [30.0]]
    form = assemble_standard_form(case_from_dict(data))
    res = solve_mpmilp(form, alpha=0)
    assert res.certificate.infeasible and not res.pieces


@pytest.fixture(scope="module")
def random_runs():
    out = []
    for seed in range(8):
        form = assemble_standard_form(random_case(seed))
        out.append((form, solve_mpmilp(form, alpha=0.01, Q=20, seed=seed), solve_mpmilp(form, alpha=0.0)))
    return out


def test_sandwich_and_exactness(random_runs):
    for i, (form, approx, exact) in enumerate(random_runs):
        bf = BruteForce(form)
        for theta in sample_box(form.theta_box, 15, i):
            ref, _ = bf.value(theta)
            if not np.isfinite(ref):
                continue
            low = exact.root_lower.value(theta, tol=1e-7)
            assert low <= ref + 1e-6
            assert exact.incumbent.value(theta) == pytest.approx(ref, abs=1e-6)
            up = approx.incumbent.value(theta)
            if np.isfinite(up):
                assert up >= ref - 1e-6


def test_witness_validity(random_runs, form51, exact51, formB, exactB):
    runs = [(f, e) for f, _, e in random_runs] + [(form51, exact51), (formB, exactB)]
    for form, res in runs:
        for p in res.pieces:
            c, r = pt.chebyshev(p.region)
            if r <= 1e-9:
                continue
            theta = res.incumbent.space.to_full(c)
            sol = solve_fixed(form, theta, fixed=p.witness)
            assert sol.status == "optimal"
            assert sol.objective == pytest.approx(p.value(theta), abs=1e-6)


def test_certificate_honest(random_runs):
    for form, approx, _ in random_runs:
        cert = approx.certificate
        for k, p in enumerate(approx.pieces):
            d, _ = gap_estimate(approx.root_lower, approx.incumbent, p.region, cert.Q, cert.seed)
            assert abs(d - cert.deltas_root[k]) <= 1e-9


def test_branch_orders_agree(formB):
    a = solve_mpmilp(formB, alpha=0, branch_order="fractional")
    pts = np.column_stack([np.linspace(0, 10, 21), np.zeros(21)])
    assert np.allclose([a.incumbent.value(t) for t in pts], np.maximum(257 - 10 * pts[:, 0], 245))
    with pytest.raises(ValueError):
        solve_mpmilp(formB, branch_order="random")
    with pytest.raises(ValueError):
        solve_mpmilp(formB, alpha=-1)
