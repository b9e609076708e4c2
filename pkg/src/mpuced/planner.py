"""Planning advice from a piecewise-affine value function.

Investment cost is linear per line, ``IC_k(theta_k) = c_k * theta_k``, so the
budget problem is one LP per affine piece.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polytope import linprog  # vertex-exact for small LPs

SPEND_TOL = 1e-9
OBJ_TOL = 1e-9


class PlannerError(ValueError):
    pass


@dataclass
class UpgradePlan:
    theta_star: np.ndarray
    spend: float
    objective: float
    binding: bool
    piece: int  # index into the pieces of the solution
    rates: np.ndarray  # cost reduction per MW at theta_star's piece
    recommended: np.ndarray  # rate exceeds unit cost


def pieces_of(sol) -> list:
    """``[(P, w, region)]`` with regions in reduced coordinates.

    Accepts an incumbent (``.pieces``) or a parametric LP solution
    (``.regions``).
    """
    if hasattr(sol, "pieces"):
        return [(np.asarray(p.P, dtype=float), float(p.w), p.region) for p in sol.pieces]
    return [(rs.value_P, rs.value_w, rs.region) for rs in sol.regions]


def _locate(sol, theta0):
    theta0 = np.asarray(theta0, dtype=float)
    y = sol.space.to_reduced(theta0)
    best, idx = np.inf, None
    for k, (P, w, region) in enumerate(pieces_of(sol)):
        if region.contains(y, 1e-9):
            v = float(P @ theta0 + w)
            if v < best - 1e-12:
                best, idx = v, k
    return idx


def rank_lines(sol, theta0) -> list:
    """``[(line, rate)]`` sorted by rate descending, ties by line index.

    ``rate = -dz/dtheta_k`` on the piece that holds ``theta0``.
    """
    idx = _locate(sol, theta0)
    if idx is None:
        raise PlannerError(f"theta0 = {list(np.asarray(theta0, dtype=float))} lies in no feasible piece")
    P = pieces_of(sol)[idx][0]
    rates = -P + 0.0
    order = sorted(range(P.size), key=lambda k: (-rates[k], k))
    return [(k, float(rates[k])) for k in order]


def _piece_lp(P, w, region, space, costs, budget, hi):
    """min over region ∩ budget ∩ box, then min spend at that value."""
    free = space.free
    lo = space.box[free, 0]
    pinned = np.setdiff1d(np.arange(space.K), free)
    fixed_spend = float(costs[pinned] @ space.box[pinned, 0])
    const = float(w + P[pinned] @ space.box[pinned, 0])
    if free.size == 0:
        if np.all(region.f >= -1e-9) and budget - fixed_spend >= -SPEND_TOL:
            return np.zeros(0), const, fixed_spend
        return None
    A = np.vstack([region.E, costs[free][None, :]])
    b = np.concatenate([region.f, [budget - fixed_spend]])
    bounds = list(zip(lo, hi[free]))
    c = P[free]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    z = float(res.fun) + const
    # second stage: cheapest point attaining z
    A2 = np.vstack([A, c[None, :]])
    b2 = np.concatenate([b, [z - const + 1e-12 * max(1.0, abs(z))]])
    res2 = linprog(costs[free], A_ub=A2, b_ub=b2, bounds=bounds, method="highs")
    y = res2.x if res2.status == 0 else res.x
    return y, z, float(costs[free] @ y) + fixed_spend


def allocate_budget(sol, costs, budget: float, bounds=None) -> UpgradePlan:
    """Best upgrade under ``sum_k c_k theta_k <= budget``.

    Ties in objective go to the smaller spend, then to the earlier piece.
    """
    space = sol.space
    costs = np.asarray(costs, dtype=float).reshape(space.K)
    if np.any(costs < 0):
        raise PlannerError("unit costs must be >= 0")
    if budget < 0:
        raise PlannerError("budget must be >= 0")
    hi = space.box[:, 1].copy()
    if bounds is not None:
        hi = np.minimum(hi, np.asarray(bounds, dtype=float).reshape(space.K))
    best = None
    for k, (P, w, region) in enumerate(pieces_of(sol)):
        out = _piece_lp(P, w, region, space, costs, budget, hi)
        if out is None:
            continue
        y, z, spend = out
        if best is None or z < best[1] - OBJ_TOL * max(1.0, abs(best[1])) or (
            abs(z - best[1]) <= OBJ_TOL * max(1.0, abs(best[1])) and spend < best[2] - SPEND_TOL
        ):
            best = (y, z, spend, k)
    if best is None:
        raise PlannerError("no piece of the solution meets the budget polytope")
    y, z, spend, k = best
    theta = space.to_full(np.clip(y, space.box[space.free, 0], hi[space.free])) + 0.0
    rates = -pieces_of(sol)[k][0] + 0.0
    return UpgradePlan(
        theta_star=theta,
        spend=float(costs @ theta),
        objective=z,
        binding=bool(costs @ theta >= budget - SPEND_TOL),
        piece=k,
        rates=rates,
        recommended=rates > costs,
    )


def recommendations(sol, costs) -> list:
    """Per piece: lines whose cost-reduction rate beats the unit cost."""
    costs = np.asarray(costs, dtype=float)
    out = []
    for P, _, _ in pieces_of(sol):
        out.append(((-P + 0.0) > costs).tolist())
    return out
