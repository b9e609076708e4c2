"""Critical regions and piecewise-affine value functions of the LP.

Parameter space: lines whose box is degenerate (``[0, 0]``) are pinned at
zero and dropped from the polytope coordinates, so regions live in the
``d``-dimensional space of the free lines.  Affine maps are still stored
against the full ``K``-vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .lp import (
    ActiveSet,
    BasisError,
    PrimalDual,
    TOL_ZERO,
    basis_active_set,
    extract_active_set,
    fixed_key,
    reduce_problem,
    solve_reduced,
)
from .polytope import Polytope
from .standard_form import StandardForm

VALUE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ParamSpace:
    box: np.ndarray  # K x 2
    free: np.ndarray  # indices of lines with positive width

    @classmethod
    def from_form(cls, form: StandardForm) -> "ParamSpace":
        box = np.asarray(form.theta_box, dtype=float)
        free = np.flatnonzero(box[:, 1] > box[:, 0]) if box.size else np.zeros(0, dtype=int)
        return cls(box=box, free=free)

    @property
    def K(self) -> int:
        return self.box.shape[0]

    @property
    def d(self) -> int:
        return self.free.size

    def polytope(self) -> Polytope:
        return pt.box_polytope(self.box[self.free, 0], self.box[self.free, 1])

    def to_full(self, y) -> np.ndarray:
        theta = self.box[:, 0].copy()
        theta[self.free] = np.asarray(y, dtype=float).reshape(self.d)
        return theta

    def to_reduced(self, theta) -> np.ndarray:
        return np.asarray(theta, dtype=float).reshape(self.K)[self.free]

    def lift(self, P: Polytope) -> Polytope:
        """Polytope in full ``K`` coordinates: embed ``P`` and pin the rest."""
        E = np.zeros((P.n_rows, self.K))
        E[:, self.free] = P.E
        pinned = np.setdiff1d(np.arange(self.K), self.free)
        Ep = np.zeros((2 * pinned.size, self.K))
        fp = np.zeros(2 * pinned.size)
        for k, j in enumerate(pinned):
            Ep[2 * k, j], fp[2 * k] = 1.0, self.box[j, 1]
            Ep[2 * k + 1, j], fp[2 * k + 1] = -1.0, -self.box[j, 0]
        return Polytope(np.vstack([E, Ep]), np.concatenate([P.f, fp]))

    def diameter(self) -> float:
        if self.d == 0:
            return 1.0
        w = self.box[self.free, 1] - self.box[self.free, 0]
        return float(np.linalg.norm(w))


@dataclass(eq=False)
class RegionSolution:
    active: ActiveSet
    fixed: dict
    omega_W: np.ndarray  # n x K
    omega_w0: np.ndarray  # n
    value_P: np.ndarray  # K
    value_w: float
    region: Polytope  # reduced coordinates
    space: ParamSpace

    def omega(self, theta) -> np.ndarray:
        return self.omega_W @ np.asarray(theta, dtype=float) + self.omega_w0

    def value(self, theta) -> float:
        return float(self.value_P @ np.asarray(theta, dtype=float) + self.value_w)

    def contains(self, theta, tol: float = 1e-9) -> bool:
        return self.region.contains(self.space.to_reduced(theta), tol)

    @property
    def value_reduced(self):
        """(gradient, offset) in reduced coordinates."""
        return self.value_P[self.space.free], self.value_w

    @property
    def key(self) -> tuple:
        return self.active.key(self.fixed)


def _affine_solution(form: StandardForm, active: ActiveSet, fixed):
    red = reduce_problem(form, fixed)
    local = {int(r): i for i, r in enumerate(red.rows)}
    try:
        p1_local = [local[int(r)] for r in active.p1]
    except KeyError as exc:
        raise BasisError(f"row {exc.args[0]} is not part of the reduced problem") from None
    p2 = list(active.p2)
    B = np.vstack([red.E[p2], red.A[p1_local]]) if (p2 or p1_local) else np.zeros((0, red.free.size))
    if B.shape[0] != B.shape[1]:
        raise BasisError(f"basis is {B.shape[0]} x {B.shape[1]}, not square")
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        raise BasisError("singular basis") from None
    if np.abs(B).sum(axis=0).max() * np.abs(Binv).sum(axis=0).max() > 1e12:
        raise BasisError("ill-conditioned basis")
    me = len(p2)
    rhs0 = np.concatenate([red.h[p2], red.r0[p1_local]])
    x0 = Binv @ rhs0
    X = Binv[:, me:] @ red.P[p1_local]  # nfree x K
    return red, p1_local, x0, X


def region_from_active_set(form: StandardForm, active: ActiveSet, fixed=None, space: ParamSpace | None = None) -> RegionSolution:
    space = space or ParamSpace.from_form(form)
    fixed = {int(j): float(v) for j, v in (fixed or {}).items()}
    red, p1_local, x0, X = _affine_solution(form, active, fixed)
    n = form.n
    W = np.zeros((n, space.K))
    w0 = np.zeros(n)
    for j, v in red.fixed.items():
        w0[j] = v
    W[red.free] = X
    w0[red.free] = x0
    # lines that cannot move contribute nothing to the rate
    if space.d < space.K:
        pinned = np.setdiff1d(np.arange(space.K), space.free)
        W[:, pinned] = 0.0
    P = form.M @ W
    w = float(form.M @ w0)
    inactive = np.setdiff1d(np.arange(red.rows.size), p1_local)
    As = red.A[inactive]
    E_full = As @ X - red.P[inactive]
    f = red.r0[inactive] - As @ x0
    # pinned coordinates sit at their lower bound (zero)
    f = f - E_full[:, np.setdiff1d(np.arange(space.K), space.free)] @ space.box[np.setdiff1d(np.arange(space.K), space.free), 0]
    E = E_full[:, space.free]
    # slacks that are identically zero come out as roundoff; clean them so a
    # degenerate row is neither a spurious halfspace nor a false infeasibility
    scale = np.maximum(1.0, np.abs(As) @ np.abs(X).sum(axis=1) + np.abs(red.P[inactive]).sum(axis=1))
    E = np.where(np.abs(E) < 1e-11 * scale[:, None], 0.0, E)
    flat = ~np.any(E != 0.0, axis=1)
    fscale = np.maximum(1.0, np.abs(red.r0[inactive]) + np.abs(As) @ np.abs(x0))
    ok = ~flat | (f < -1e-9 * fscale)
    E, f = E[ok], np.where(flat[ok], -1.0, f[ok])
    region = Polytope(E, f).intersect(space.polytope())
    return RegionSolution(active, fixed, W, w0, P, w, region, space)


def value_gradient(rs: RegionSolution, k: int) -> float:
    """Rate of change of the optimal value along line ``k`` (0-based)."""
    if not 0 <= k < rs.value_P.size:
        raise IndexError(f"line index {k} out of range")
    return float(rs.value_P[k])


def value_gradient_rows(form: StandardForm, rs: RegionSolution, k: int) -> float:
    """Same rate summed from the basis rows that carry line ``k``.

    Computes ``sum_{rows of line k in p1} (A_p^-T M)_row`` directly, as an
    independent check on ``value_gradient``.
    """
    if k not in set(int(j) for j in rs.space.free):
        return 0.0
    red = reduce_problem(form, rs.fixed)
    local = {int(r): i for i, r in enumerate(red.rows)}
    p1_local = [local[int(r)] for r in rs.active.p1]
    p2 = list(rs.active.p2)
    B = np.vstack([red.E[p2], red.A[p1_local]])
    y = np.linalg.solve(B.T, red.c)
    total = 0.0
    for pos, r in enumerate(rs.active.p1):
        if form.row_param[r] == k:
            total += y[len(p2) + pos]
    return float(total)


@dataclass(eq=False)
class ParametricSolution:
    regions: list
    box: Polytope  # reduced coordinates
    space: ParamSpace
    uncovered: list = field(default_factory=list)  # reduced polytopes, infeasible
    fixed: dict = field(default_factory=dict)
    degenerate_points: list = field(default_factory=list)
    solves: int = 0

    def locate(self, theta, tol: float = 1e-9):
        y = self.space.to_reduced(theta)
        for idx, rs in enumerate(self.regions):
            if rs.region.contains(y, tol):
                return idx
        return None

    def value(self, theta, tol: float = 1e-9) -> float:
        """Piecewise value; ``inf`` on certified-infeasible or unknown points."""
        idx = self.locate(theta, tol)
        if idx is None:
            return np.inf
        return self.regions[idx].value(theta)

    def is_uncovered(self, theta, tol: float = 1e-9) -> bool:
        y = self.space.to_reduced(theta)
        return any(U.contains(y, tol) for U in self.uncovered)

    @property
    def feasible(self) -> bool:
        return bool(self.regions)

    def value_pieces(self, tol: float = 1e-7):
        """Regions sharing one value function, merged where the union is convex.

        Returns ``(P, w, polytope)`` triples ordered by their Chebyshev center.
        """
        groups: list = []
        for rs in self.regions:
            for g in groups:
                if np.allclose(g[0], rs.value_P, atol=tol, rtol=0) and abs(g[1] - rs.value_w) <= tol * max(1.0, abs(g[1])):
                    g[2].append(rs.region)
                    break
            else:
                groups.append([rs.value_P.copy(), rs.value_w, [rs.region]])
        out = []
        for P, w, polys in groups:
            for poly in pt.envelope_merge(polys):
                out.append((P, w, poly))
        out.sort(key=lambda t: tuple(np.round(pt.chebyshev(t[2])[0], 9)))
        return out


def _infeasible_halfspace(red, sol: PrimalDual, space: ParamSpace):
    """Farkas certificate as ``{y : a @ y <= b}`` where infeasibility is proven."""
    y, z = sol.farkas
    yl = y[red.rows]
    a_full = yl @ red.P
    const = yl @ red.r0 + z @ red.h
    pinned = np.setdiff1d(np.arange(space.K), space.free)
    const = const + a_full[pinned] @ space.box[pinned, 0]
    return a_full[space.free], -const


class _Explorer:
    def __init__(self, form, fixed, box, space, seed=0):
        self.form = form
        self.fixed = {int(j): float(v) for j, v in (fixed or {}).items()}
        self.red = reduce_problem(form, self.fixed)
        self.space = space
        self.box = box
        lo, hi = pt.bounding_box(box)
        span = hi - lo if space.d else np.zeros(0)
        self.diam = float(np.linalg.norm(span)) if space.d else 1.0
        self.eps = 1e-7 * max(self.diam, 1e-12)
        self.regions: list = []
        self.uncovered: list = []
        self.seen: set = set()
        self.degenerate: list = []
        self.solves = 0
        self.last_basis = None  # any optimal basis is dual feasible for every theta
        self.rng = np.random.default_rng(seed)

    def _solve(self, y, hint=None):
        self.solves += 1
        sol = solve_reduced(self.red, self.space.to_full(y), hint if hint is not None else self.last_basis)
        if sol.status == "optimal":
            self.last_basis = sol.basis
        return sol

    def covered(self, y, tol=0.0) -> bool:
        for rs in self.regions:
            if rs.region.contains(y, tol):
                return True
        for U in self.uncovered:
            if U.contains(y, tol):
                return True
        return False

    def _region_at(self, sol):
        """Full-dimensional region for an optimal solve, or ``None``."""
        cands = []
        try:
            cands.append(extract_active_set(sol, self.form, TOL_ZERO))
        except BasisError:
            pass
        cands.append(basis_active_set(sol, self.form))
        for act in cands:
            key = act.key(self.fixed)
            if key in self.seen:
                return "seen"
            try:
                rs = region_from_active_set(self.form, act, self.fixed, self.space)
            except BasisError:
                continue
            reg = rs.region.intersect(self.box)
            red_poly = pt.reduce(reg)
            if red_poly is None or not pt.has_interior(red_poly):
                continue
            rs.region = red_poly
            return rs
        return None

    def probe(self, y, hint=None) -> list:
        """Solve at ``y``; register the region or infeasible cut found there."""
        sol = self._solve(y, hint)
        if sol.status == "infeasible":
            a, b = _infeasible_halfspace(self.red, sol, self.space)
            U = self.box.add(a, b) if self.space.d else self.box
            if self.space.d and np.linalg.norm(a) < 1e-14:
                U = self.box if b >= 0 else None
            if U is not None:
                Ur = pt.reduce(U)
                if Ur is not None and (self.space.d == 0 or pt.has_interior(Ur)):
                    self.uncovered.append(Ur)
                    return []
            self.degenerate.append(y)
            return []
        if sol.status != "optimal":
            raise RuntimeError(f"LP at {self.space.to_full(y)} is {sol.status}")
        rs = self._region_at(sol)
        if rs == "seen":
            return []
        if rs is None:
            # degenerate vertex: retry at nearby points
            for scale in (1e-6, 1e-5, 1e-4, 1e-3):
                if self.space.d == 0:
                    break
                for _ in range(3):
                    yp = y + scale * self.diam * self.rng.standard_normal(self.space.d)
                    if not self.box.contains(yp, 0.0) or self.covered(yp):
                        continue
                    sol2 = self._solve(yp, sol.basis)
                    if sol2.status != "optimal":
                        continue
                    rs = self._region_at(sol2)
                    if rs == "seen":
                        rs = None
                        continue
                    if rs is not None:
                        break
                if rs is not None:
                    break
            if rs is None:
                self.degenerate.append(y)
                return []
        self.seen.add(rs.key)
        self.regions.append(rs)
        return self._neighbors(rs, sol.basis)

    def _neighbors(self, rs, hint):
        out = []
        if self.space.d == 0:
            return out
        for _, a, _, xf in pt.facets(rs.region):
            yp = xf + self.eps * a
            if not self.box.contains(yp, 0.0):
                continue
            if self.covered(yp):
                continue
            out.append((yp, hint))
        return out

    def run(self, max_rounds: int = 50):
        c, _ = pt.chebyshev(self.box)
        queue = [(c, None)]
        for _ in range(max_rounds):
            while queue:
                y, hint = queue.pop(0)
                if self.covered(y):
                    continue
                queue.extend(self.probe(y, hint))
            if self.space.d == 0:
                break
            rest = pt.difference_many(self.box, [r.region for r in self.regions] + self.uncovered)
            if not rest:
                break
            for piece in rest:
                cc, rad = pt.chebyshev(piece)
                if cc is not None and rad > 0:
                    queue.append((cc, None))
            if not queue:
                break
        return self


def explore(form: StandardForm, fixed=None, box: Polytope | None = None, seed: int = 0) -> ParametricSolution:
    """Cover ``box`` (reduced coordinates; default the whole parameter box)
    with critical regions of the LP with ``fixed`` binaries substituted."""
    space = ParamSpace.from_form(form)
    box = space.polytope() if box is None else box
    if space.d and not pt.has_interior(box):
        return ParametricSolution([], box, space, [], dict(fixed or {}))
    ex = _Explorer(form, fixed, box, space, seed).run()
    regions = sorted(ex.regions, key=lambda r: (tuple(np.round(pt.chebyshev(r.region)[0], 9)), r.key))
    return ParametricSolution(
        regions=regions,
        box=box,
        space=space,
        uncovered=ex.uncovered,
        fixed=dict(ex.fixed),
        degenerate_points=ex.degenerate,
        solves=ex.solves,
    )
