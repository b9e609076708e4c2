"""Parametric branch and bound over the commitment binaries.

Each node fixes a subset of the ``U`` columns and owns the part of the
parameter space not yet resolved.  Its relaxation bounds the value from
below; rounded commitments give integer-feasible upper bounds, merged into
the incumbent as a piecewise pointwise minimum.  ``V`` is never branched on:
once ``U`` is integral the cheapest feasible startup vector is
``max(U_t - U_{t-1}, 0)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .mplp import ParametricSolution, ParamSpace, RegionSolution, explore
from .polytope import Polytope
from .standard_form import StandardForm, relax_binaries

TIE_TOL = 1e-9
INT_TOL = 1e-7
DENOM_TOL = 1e-9


class InfeasibleProblem(RuntimeError):
    """The relaxation is infeasible over the whole parameter box."""


@dataclass(eq=False)
class BnbNode:
    id: int
    fixed: dict
    unexplored: list
    depth: int = 0
    lower: ParametricSolution | None = None
    parent_lower: list = field(default_factory=list)  # [(poly, P, w)] valid on unexplored


@dataclass(eq=False)
class IncumbentPiece:
    region: Polytope  # reduced coordinates
    P: np.ndarray  # K
    w: float
    witness: dict  # binary column -> 0/1
    rs: RegionSolution | None = None

    def value(self, theta) -> float:
        return float(self.P @ theta + self.w)


@dataclass(eq=False)
class Incumbent:
    space: ParamSpace
    pieces: list = field(default_factory=list)

    def value(self, theta, tol: float = 1e-9) -> float:
        y = self.space.to_reduced(theta)
        best = np.inf
        for p in self.pieces:
            if p.region.contains(y, tol):
                best = min(best, p.value(theta))
        return best

    def locate(self, theta, tol: float = 1e-9):
        y = self.space.to_reduced(theta)
        best, idx = np.inf, None
        for k, p in enumerate(self.pieces):
            if p.region.contains(y, tol):
                v = p.value(theta)
                if v < best - 1e-12:
                    best, idx = v, k
        return idx

    def regions(self) -> list:
        return [p.region for p in self.pieces]


# --- rounding -----------------------------------------------------------

def round_and_repair(rs: RegionSolution, form: StandardForm, xi: float, point=None):
    """Integer assignment from the relaxed solution at the region's center.

    ``U = 1`` where ``U* >= xi``; ``V = max(U_t - U_{t-1}, 0)``.  Returns
    ``None`` when the rounded ``U`` violates a minimum up or down time.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError("xi must lie in [0, 1]")
    if point is None:
        c, _ = pt.chebyshev(rs.region)
        point = rs.space.to_full(c)
    omega = rs.omega(point)
    if form.u_idx is None:
        return {int(j): float(omega[j] >= xi - 1e-9) for j in form.binary_idx}
    U = (omega[form.u_idx] >= xi - 1e-9).astype(float)
    for j, v in rs.fixed.items():
        hit = np.argwhere(form.u_idx == j)
        if hit.size:
            U[tuple(hit[0])] = v
    return repair_v(form, U)


def repair_v(form: StandardForm, U) -> dict | None:
    U = np.asarray(U, dtype=float)
    N, T = form.u_idx.shape
    V = np.maximum(U[:, 1:] - U[:, :-1], 0.0) if T > 1 else np.zeros((N, 0))
    omega = np.zeros(form.n)
    omega[form.u_idx.ravel()] = U.ravel()
    if V.size:
        omega[form.v_idx.ravel()] = V.ravel()
    for name in ("min_on", "min_off", "state_transition"):
        rows = list(form.block(name))
        if rows and np.any(form.A[rows] @ omega > form.b[rows] + 1e-9):
            return None
    out = {int(j): float(v) for j, v in zip(form.u_idx.ravel(), U.ravel())}
    if V.size:
        out.update({int(j): float(v) for j, v in zip(form.v_idx.ravel(), V.ravel())})
    return out


def node_upper_bound(form: StandardForm, UV: dict, box: Polytope | None = None) -> ParametricSolution:
    """Parametric LP with every binary fixed to ``UV``."""
    return explore(relax_binaries(form) if form.binary_idx.size else form, fixed=UV, box=box)


# --- gap ----------------------------------------------------------------

def gap_estimate(lower, upper, region: Polytope, Q: int, seed: int):
    """Mean relative gap over ``Q`` seeded uniform samples of ``region``.

    ``lower`` and ``upper`` are callables or objects with ``.value``.
    Returns ``(delta, flagged)`` where ``flagged`` marks samples whose lower
    value was too close to zero to divide by.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    if pt.is_empty(region):
        raise ValueError("empty region")
    lo_f = lower.value if hasattr(lower, "value") else lower
    up_f = upper.value if hasattr(upper, "value") else upper
    space = _space_of(lower) or _space_of(upper)
    rng = np.random.default_rng(seed)
    pts = pt.sample(region, Q, rng)
    total = 0.0
    flagged = False
    for y in pts:
        theta = space.to_full(y) if space is not None else y
        zl = _robust(lo_f, theta)
        zu = _robust(up_f, theta)
        if abs(zl) < DENOM_TOL:
            total += zu - zl
            flagged = True
        else:
            total += (zu - zl) / zl
    return total / Q, flagged


def _space_of(obj):
    return getattr(obj, "space", None)


def _robust(fn, theta):
    v = fn(theta)
    if not np.isfinite(v):
        v = fn(theta, tol=1e-7)
    return v


# --- branching ----------------------------------------------------------

def branch(node: BnbNode, var: int, counter: list) -> tuple:
    """Two children fixing ``var`` to 1 and to 0, inheriting the open space."""
    var = int(var)
    if var in node.fixed:
        raise ValueError(f"column {var} is already fixed")
    kids = []
    for val in (1.0, 0.0):
        counter[0] += 1
        fx = dict(node.fixed)
        fx[var] = val
        kids.append(BnbNode(counter[0], fx, list(node.unexplored), node.depth + 1))
    return kids[0], kids[1]


def _pick_var(form: StandardForm, node: BnbNode, policy: str):
    cands = [j for j in form.branch_candidates() if j not in node.fixed]
    if not cands:
        return None
    if policy == "index" or node.lower is None or not node.lower.regions:
        return cands[0]
    if policy != "fractional":
        raise ValueError(f"unknown branch order {policy!r}")
    best, score = cands[0], -1.0
    for rs in node.lower.regions:
        c, _ = pt.chebyshev(rs.region)
        om = rs.omega(rs.space.to_full(c))
        for j in cands:
            s = 0.5 - abs(om[j] - 0.5)
            if s > score + 1e-12:
                best, score = j, s
    return best


# --- incumbent merge and pruning ---------------------------------------

def _diff_range(region: Polytope, space: ParamSpace, P1, w1, P2, w2):
    a = (P1 - P2)[space.free]
    return pt.affine_range(region, a, w1 - w2)


def _halfspace(space: ParamSpace, P1, w1, P2, w2, sense: str):
    """``{(P1 - P2) y + (w1 - w2) <= 0}`` (sense 'le') or ``>= 0``."""
    a = (P1 - P2)[space.free]
    b = w2 - w1
    return (a, b) if sense == "le" else (-a, -b)


def merge_incumbent(inc: Incumbent, new_pieces: list) -> bool:
    """Pointwise minimum; ties keep the existing piece.  Returns whether
    anything changed."""
    space = inc.space
    changed = False
    for npc in new_pieces:
        parts = [npc.region]
        nxt_old = []
        nlo, nhi = pt.bounding_box(npc.region)
        for old in inc.pieces:
            olo, ohi = pt.bounding_box(old.region)
            if np.any(olo > nhi + 1e-9) or np.any(nlo > ohi + 1e-9):
                nxt_old.append(old)
                continue
            remaining_old = [old.region]
            new_parts = []
            for part in parts:
                X = part.intersect(old.region)
                if not pt.has_interior(X):
                    new_parts.append(part)
                    continue
                lo, hi = _diff_range(X, space, npc.P, npc.w, old.P, old.w)
                scale = max(1.0, abs(old.w), abs(npc.w))
                if lo >= -TIE_TOL * scale:
                    # new is nowhere better on X
                    new_parts.extend(pt.difference(part, X))
                    continue
                if hi <= TIE_TOL * scale:
                    better = X
                else:
                    a, b = _halfspace(space, npc.P, npc.w, old.P, old.w, "le")
                    better = X.add(a, b)
                    a2, b2 = _halfspace(space, npc.P, npc.w, old.P, old.w, "ge")
                    worse = X.add(a2, b2)
                    new_parts.extend(pt.difference(part, worse))
                    remaining_old = [q for R in remaining_old for q in _sub(R, better)]
                    continue
                new_parts.append(part)
                remaining_old = [q for R in remaining_old for q in _sub(R, better)]
            parts = [p for p in new_parts if pt.has_interior(p)]
            for R in remaining_old:
                if R is old.region:
                    nxt_old.append(old)
                else:
                    changed = True
                    nxt_old.append(IncumbentPiece(R, old.P, old.w, old.witness, old.rs))
        inc.pieces = nxt_old
        for part in parts:
            red = pt.reduce(part)
            if red is not None and pt.has_interior(red):
                inc.pieces.append(IncumbentPiece(red, npc.P, npc.w, npc.witness, npc.rs))
                changed = True
    _compress(inc)
    return changed


def _sub(R: Polytope, B: Polytope):
    if not pt.has_interior(R.intersect(B)):
        return [R]
    return pt.difference(R, B)


def _compress(inc: Incumbent):
    groups: dict = {}
    order = []
    for p in inc.pieces:
        key = (tuple(np.round(p.P, 9)), round(p.w, 9), tuple(sorted(p.witness.items())))
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(p)
    out = []
    for key in order:
        ps = groups[key]
        if len(ps) == 1:
            red = pt.reduce(ps[0].region)
            # slivers left by splitting carry no value of their own
            if red is not None and pt.has_interior(red):
                ps[0].region = red
                out.append(ps[0])
            continue
        for poly in pt.envelope_merge([p.region for p in ps if pt.has_interior(p.region)]):
            out.append(IncumbentPiece(poly, ps[0].P, ps[0].w, ps[0].witness, ps[0].rs))
    out = _drop_specks(out, inc.space)
    out.sort(key=lambda p: tuple(np.round(pt.chebyshev(p.region)[0], 9)))
    inc.pieces = out


SPECK_TOL = 1e-6  # relative to the box diameter


def _drop_specks(pieces: list, space: ParamSpace) -> list:
    """Remove tiny leftovers of splitting that lie inside a piece at least
    as good; they would only add spurious facets."""
    limit = SPECK_TOL * space.diameter()
    keep = []
    for i, p in enumerate(pieces):
        c, r = pt.chebyshev(p.region)
        if c is not None and r < limit:
            theta = space.to_full(c)
            v = p.value(theta)
            if any(
                j != i and q.region.contains(c, 1e-9) and q.value(theta) <= v + TIE_TOL * max(1.0, abs(v))
                for j, q in enumerate(pieces)
            ):
                continue
        keep.append(p)
    return keep


def prune_and_merge(node_lower: ParametricSolution, incumbent: Incumbent, integral=None, binary_cols=()):
    """Remove dominated space from the node and fold integral pieces in.

    ``integral`` lists the indices of relaxation regions whose solution is
    already integer; they are merged into the incumbent and removed from the
    surviving space.  Returns ``(incumbent, surviving polytopes with their
    lower functions)``.
    """
    integral = set(integral or ())
    space = incumbent.space
    new = []
    for idx in sorted(integral):
        rs = node_lower.regions[idx]
        new.append(IncumbentPiece(rs.region, rs.value_P, rs.value_w, _witness(rs, binary_cols), rs))
    if new:
        merge_incumbent(incumbent, new)
    surviving = []
    for idx, rs in enumerate(node_lower.regions):
        if idx in integral:
            continue
        pieces = [rs.region]
        for inc in incumbent.pieces:
            X = rs.region.intersect(inc.region)
            if not pt.has_interior(X):
                continue
            scale = max(1.0, abs(inc.w))
            a, b = _halfspace(space, rs.value_P, rs.value_w, inc.P, inc.w, "ge")
            dom = X.add(a, b + TIE_TOL * scale)  # ties are dominated too
            if not pt.has_interior(dom):
                continue
            pieces = [q for R in pieces for q in _sub(R, dom)]
            if not pieces:
                break
        for q in pieces:
            red = pt.reduce(q)
            if red is not None and pt.has_interior(red):
                surviving.append((red, rs))
    return incumbent, surviving


def _witness(rs: RegionSolution, cols) -> dict:
    return {int(j): float(round(rs.omega_w0[j])) for j in cols}


def _integral(rs: RegionSolution, cols) -> bool:
    if not cols:
        return True
    W = rs.omega_W[cols]
    w0 = rs.omega_w0[cols]
    return bool(np.all(np.abs(W) < INT_TOL) and np.all(np.minimum(np.abs(w0), np.abs(w0 - 1.0)) < INT_TOL))


# --- driver -------------------------------------------------------------

@dataclass
class Certificate:
    alpha: float
    xi: float
    Q: int
    seed: int
    branch_order: str
    node_count: int
    termination: str
    deltas_root: list
    deltas_live: list
    flagged: list
    max_delta: float
    elapsed: float
    infeasible: bool = False


@dataclass(eq=False)
class MilpResult:
    incumbent: Incumbent
    certificate: Certificate
    root_lower: ParametricSolution
    trace: list  # per processed node: (id, fixed, kind)

    @property
    def pieces(self):
        return self.incumbent.pieces


def solve_mpmilp(
    form: StandardForm,
    box: Polytope | None = None,
    alpha: float = 0.01,
    xi: float = 0.0,
    Q: int = 50,
    seed: int = 0,
    branch_order: str = "index",
    max_nodes: int | None = None,
) -> MilpResult:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if branch_order not in ("index", "fractional"):
        raise ValueError(f"unknown branch order {branch_order!r}")
    t0 = time.perf_counter()
    rform = relax_binaries(form)
    space = ParamSpace.from_form(form)
    box = space.polytope() if box is None else box
    inc = Incumbent(space)
    counter = [0]
    root = BnbNode(0, {}, [box])
    stack = [root]
    ub_cache: dict = {}
    merged: set = set()
    trace: list = []
    root_lower = None
    binary_cols = [int(j) for j in form.u_idx.ravel()] + [int(j) for j in form.v_idx.ravel()] if form.u_idx is not None else [int(j) for j in form.binary_idx]
    u_cols = set(form.branch_candidates())
    processed = 0
    termination = "exhausted"

    def upper_for(UV):
        key = tuple(sorted(UV.items()))
        if key not in ub_cache:
            sol = node_upper_bound(rform, UV, box)
            ub_cache[key] = [IncumbentPiece(r.region, r.value_P, r.value_w, dict(UV), r) for r in sol.regions]
        return ub_cache[key]

    while stack:
        if max_nodes is not None and processed >= max_nodes:
            termination = "node_limit"
            break
        node = stack.pop()
        processed += 1
        leaf = u_cols.issubset(node.fixed)
        if leaf:
            U = np.array([[node.fixed[int(form.u_idx[i, t])] for t in range(form.u_idx.shape[1])] for i in range(form.u_idx.shape[0])]) if form.u_idx is not None else None
            UV = repair_v(form, U) if U is not None else dict(node.fixed)
            if UV is None:
                trace.append((node.id, dict(node.fixed), "repair_infeasible"))
                continue
            pieces = []
            for piece in node.unexplored:
                sol = explore(rform, UV, piece)
                pieces.extend(IncumbentPiece(r.region, r.value_P, r.value_w, dict(UV), r) for r in sol.regions)
            trace.append((node.id, dict(node.fixed), "leaf" if pieces else "infeasible"))
            if pieces:
                merge_incumbent(inc, pieces)
        else:
            regions, uncovered = [], []
            for piece in node.unexplored:
                sol = explore(rform, node.fixed, piece)
                regions.extend(sol.regions)
                uncovered.extend(sol.uncovered)
            node.lower = ParametricSolution(regions, box, space, uncovered, dict(node.fixed))
            if node.id == 0:
                root_lower = node.lower
                if not regions:
                    cert = Certificate(alpha, xi, Q, seed, branch_order, 1, "infeasible", [], [], [], np.nan, time.perf_counter() - t0, True)
                    return MilpResult(inc, cert, node.lower, [(0, {}, "infeasible")])
            if not regions:
                trace.append((node.id, dict(node.fixed), "infeasible"))
                continue
            integral = [k for k, rs in enumerate(regions) if _integral(rs, binary_cols)]
            for k, rs in enumerate(regions):
                if k in integral:
                    continue
                UV = round_and_repair(rs, form, xi)
                if UV is not None:
                    key = tuple(sorted(UV.items()))
                    if key not in merged:
                        merged.add(key)
                        merge_incumbent(inc, upper_for(UV))
            inc, surviving = prune_and_merge(node.lower, inc, integral, binary_cols)
            trace.append((node.id, dict(node.fixed), "relaxed"))
            if surviving:
                var = _pick_var(form, node, branch_order)
                node.unexplored = [s for s, _ in surviving]
                one, zero = branch(node, var, counter)
                lows = [(s, rs.value_P, rs.value_w) for s, rs in surviving]
                one.parent_lower = lows
                zero.parent_lower = lows
                stack.append(zero)
                stack.append(one)
        if alpha > 0 and root_lower is not None and _gap_closed(inc, stack, root_lower, alpha, Q, seed, space):
            termination = "gap"
            break

    deltas_root, flagged = [], []
    for p in inc.pieces:
        d, fl = gap_estimate(root_lower, inc, p.region, Q, seed)
        deltas_root.append(d)
        flagged.append(fl)
    live_lb = _live_lower(stack, inc, space)
    deltas_live = [gap_estimate(live_lb, inc, p.region, Q, seed)[0] for p in inc.pieces]
    cert = Certificate(
        alpha=alpha, xi=xi, Q=Q, seed=seed, branch_order=branch_order,
        node_count=processed, termination=termination,
        deltas_root=deltas_root, deltas_live=deltas_live, flagged=flagged,
        max_delta=max(deltas_live) if deltas_live else np.nan,
        elapsed=time.perf_counter() - t0,
    )
    return MilpResult(inc, cert, root_lower, trace)


class _LiveLower:
    """min over open nodes of their inherited lower bound; the incumbent
    where no open node remains."""

    def __init__(self, stack, inc, space):
        self.stack = list(stack)
        self.inc = inc
        self.space = space

    def value(self, theta, tol: float = 1e-9) -> float:
        y = self.space.to_reduced(theta)
        best = np.inf
        for node in self.stack:
            for poly, P, w in node.parent_lower:
                if poly.contains(y, tol):
                    best = min(best, float(P @ theta + w))
        if not np.isfinite(best):
            best = self.inc.value(theta, tol)
        return best


def _live_lower(stack, inc, space):
    return _LiveLower(stack, inc, space)


def _gap_closed(inc: Incumbent, stack, root_lower, alpha, Q, seed, space) -> bool:
    if not inc.pieces:
        return False
    regions = inc.regions()
    for node in stack:
        for piece in node.unexplored:
            if not pt.union_covers(piece, regions):
                return False
    lb = _live_lower(stack, inc, space)
    for p in inc.pieces:
        d, _ = gap_estimate(lb, inc, p.region, Q, seed)
        if d > alpha:
            return False
    return True
