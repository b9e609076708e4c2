"""H-polytopes ``{x : E @ x <= f}`` in low dimension.

Support for critical regions: Chebyshev centers, redundancy removal,
set difference as a disjoint union, facets, sampling and convex-union
merging.  LPs go through scipy's HiGHS; one-dimensional polytopes are
handled in closed form.  Small LPs (the usual case) go through the
package's own dense simplex, which avoids the per-call setup cost of
HiGHS; HiGHS remains the fallback.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog as _scipy_linprog

from .simplex import _Stall, solve_lp

TOL = 1e-9
INTERIOR_TOL = 1e-8
BIG = 1e7
SMALL_LP = 400  # rows x columns below which the dense simplex is used


class _Res:
    __slots__ = ("status", "x", "fun")

    def __init__(self, status, x, fun):
        self.status, self.x, self.fun = status, x, fun


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, method="highs"):
    """Subset of ``scipy.optimize.linprog``: status 0 optimal, 2 infeasible,
    3 unbounded."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    if A_ub.shape[0] * n > SMALL_LP * 8:
        return _scipy_linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=method)
    rows, rhs = [A_ub], [b_ub]
    for j, (lo, hi) in enumerate(bounds or [(None, None)] * n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(e[None, :]); rhs.append([BIG if hi is None else hi])
        rows.append(-e[None, :]); rhs.append([BIG if lo is None else -lo])
    A = np.vstack(rows)
    b = np.concatenate([np.asarray(r, dtype=float) for r in rhs])
    try:
        res = solve_lp(c, A, b, A_eq, b_eq)
    except (_Stall, np.linalg.LinAlgError, ValueError):
        return _scipy_linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=method)
    if res.status == "infeasible":
        return _Res(2, None, np.nan)
    x = res.x
    # hitting an artificial bound means the true LP is unbounded
    art = np.concatenate([np.abs(x) >= BIG * (1 - 1e-9)])
    if np.any(art):
        free_bounds = bounds or [(None, None)] * n
        for j in np.flatnonzero(art):
            lo, hi = free_bounds[j]
            if (x[j] > 0 and hi is None) or (x[j] < 0 and lo is None):
                return _Res(3, x, -np.inf)
    return _Res(0, x, float(c @ x))


@dataclass(frozen=True, eq=False)
class Polytope:
    E: np.ndarray
    f: np.ndarray

    @property
    def dim(self) -> int:
        return self.E.shape[1]

    @property
    def n_rows(self) -> int:
        return self.E.shape[0]

    def contains(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if self.n_rows == 0:
            return True
        return bool(np.all(self.E @ x <= self.f + tol))

    def violation(self, x) -> float:
        if self.n_rows == 0:
            return 0.0
        return float(np.max(self.E @ np.asarray(x, dtype=float) - self.f))

    def intersect(self, other: "Polytope") -> "Polytope":
        return Polytope(np.vstack([self.E, other.E]), np.concatenate([self.f, other.f]))

    def add(self, E_rows, f_rows) -> "Polytope":
        f_rows = np.atleast_1d(np.asarray(f_rows, dtype=float))
        E_rows = np.asarray(E_rows, dtype=float).reshape(f_rows.size, self.dim)
        return Polytope(np.vstack([self.E, E_rows]), np.concatenate([self.f, f_rows]))

    def to_dict(self) -> dict:
        return {"E": self.E.tolist(), "f": self.f.tolist()}


def box_polytope(lo, hi) -> Polytope:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    d = lo.size
    I = np.eye(d)
    return Polytope(np.vstack([I, -I]), np.concatenate([hi, -lo]))


def normalize(P: Polytope) -> Polytope | None:
    """Unit-norm rows; constant rows are dropped, or ``None`` if one fails."""
    norms = np.linalg.norm(P.E, axis=1)
    const = norms < 1e-14
    if np.any(P.f[const] < -TOL):
        return None
    keep = ~const
    E = P.E[keep] / norms[keep, None] + 0.0
    f = P.f[keep] / norms[keep] + 0.0
    return Polytope(E, f)


def _interval(P: Polytope):
    e, f = P.E[:, 0], P.f
    lo, hi = -np.inf, np.inf
    pos, neg = e > 1e-14, e < -1e-14
    if np.any(pos):
        hi = float(np.min(f[pos] / e[pos]))
    if np.any(neg):
        lo = float(np.max(f[neg] / e[neg]))
    zero = ~(pos | neg)
    if np.any(f[zero] < -TOL):
        return np.inf, -np.inf
    return lo, hi


POLY_BOUND = 1e6


def _polygon(P: Polytope) -> np.ndarray:
    """Vertices (counter-clockwise) of a 2-D polytope clipped to a large square."""
    cached = P.__dict__.get("_verts")
    if cached is not None:
        return cached
    B = POLY_BOUND
    V = np.array([[-B, -B], [B, -B], [B, B], [-B, B]])
    for a, b in zip(P.E, P.f):
        if V.shape[0] == 0:
            break
        s = V @ a - b
        if np.all(s <= 1e-12):
            continue
        out = []
        k = V.shape[0]
        for i in range(k):
            j = (i + 1) % k
            si, sj = s[i], s[j]
            if si <= 1e-12:
                out.append(V[i])
            if (si < -1e-12 and sj > 1e-12) or (si > 1e-12 and sj < -1e-12):
                t = si / (si - sj)
                out.append(V[i] + t * (V[j] - V[i]))
        V = np.array(out).reshape(-1, 2)
        if V.shape[0]:
            keep = np.ones(V.shape[0], dtype=bool)
            for i in range(V.shape[0]):
                if np.max(np.abs(V[i] - V[(i + 1) % V.shape[0]])) < 1e-12 and V.shape[0] > 1:
                    keep[i] = False
            V = V[keep]
    object.__setattr__(P, "_verts", V)
    return V


def _area_perimeter(V: np.ndarray):
    if V.shape[0] < 3:
        return 0.0, 0.0
    x, y = V[:, 0], V[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    per = float(np.sum(np.linalg.norm(V - np.roll(V, -1, axis=0), axis=1)))
    return float(area), per


def _inradius_estimate(P: Polytope) -> float:
    """``2 * area / perimeter``; within a factor two of the Chebyshev radius."""
    V = _polygon(P)
    area, per = _area_perimeter(V)
    if V.shape[0] == 0:
        return -1.0
    if per == 0.0:
        return 0.0
    return 2.0 * area / per


def chebyshev(P: Polytope, bound: float = 1e6):
    """Center and radius of the largest inscribed ball.

    The radius is negative for an empty polytope; ``(None, -1)`` when the
    LP itself fails.
    """
    d = P.dim
    if d == 0:
        ok = P.n_rows == 0 or np.all(P.f >= -TOL)
        return (np.zeros(0), 1.0) if ok else (None, -1.0)
    if d == 1:
        lo, hi = _interval(P)
        if lo > hi + TOL:
            return None, -1.0
        lo_b, hi_b = max(lo, -bound), min(hi, bound)
        return np.array([0.5 * (lo_b + hi_b)]), 0.5 * (hi_b - lo_b)
    norms = np.linalg.norm(P.E, axis=1)
    A = np.hstack([P.E, norms[:, None]])
    c = np.zeros(d + 1)
    c[-1] = -1.0
    res = linprog(
        c, A_ub=A, b_ub=P.f, bounds=[(-bound, bound)] * d + [(None, bound)],
        method="highs",
    )
    if res.status != 0:
        return None, -1.0
    return res.x[:d], float(res.x[-1])


def has_interior(P: Polytope, tol: float = INTERIOR_TOL) -> bool:
    if P.dim == 2:
        return _inradius_estimate(P) > tol
    _, rad = chebyshev(P)
    return rad > tol


def is_empty(P: Polytope, tol: float = TOL) -> bool:
    if P.dim == 2:
        return _polygon(P).shape[0] == 0
    x, rad = chebyshev(P)
    return x is None or rad < -tol


def reduce(P: Polytope, tol: float = TOL) -> Polytope | None:
    """Drop redundant rows; ``None`` when the polytope is empty."""
    Q = normalize(P)
    if Q is None:
        return None
    d = Q.dim
    if Q.n_rows == 0:
        return Q
    if d == 1:
        lo, hi = _interval(Q)
        if lo > hi + tol:
            return None
        E, f = [], []
        if np.isfinite(hi):
            E.append([1.0]); f.append(hi)
        if np.isfinite(lo):
            E.append([-1.0]); f.append(-lo)
        return Polytope(np.array(E).reshape(-1, 1), np.array(f))
    if d == 2:
        V = _polygon(Q)
        if V.shape[0] == 0:
            return None
        keep = []
        seen = []
        for i in range(Q.n_rows):
            on = np.abs(V @ Q.E[i] - Q.f[i]) <= 1e-9 * max(1.0, abs(Q.f[i]))
            pts = V[on]
            if pts.shape[0] >= 2 and np.max(np.ptp(pts, axis=0)) > 1e-12:
                row = np.append(Q.E[i], Q.f[i])
                if any(np.max(np.abs(row - r)) < 1e-12 for r in seen):
                    continue
                seen.append(row)
                keep.append(i)
        if not keep and V.shape[0] >= 1:
            keep = list(range(Q.n_rows))
        return Polytope(Q.E[keep], Q.f[keep])
    # exact duplicates first
    key = np.round(np.hstack([Q.E, Q.f[:, None]]), 12)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    E, f = Q.E[first], Q.f[first]
    # parallel rows: keep the tightest
    keep = np.ones(len(f), dtype=bool)
    for i in range(len(f)):
        if not keep[i]:
            continue
        par = keep & (np.abs(E @ E[i] - 1.0) < 1e-12)
        par[i] = False
        for j in np.flatnonzero(par):
            if f[j] >= f[i]:
                keep[j] = False
            else:
                keep[i] = False
                break
    E, f = E[keep], f[keep]
    if is_empty(Polytope(E, f)):
        return None
    keep = np.ones(len(f), dtype=bool)
    for i in range(len(f)):
        others = keep.copy()
        others[i] = False
        A_ub = np.vstack([E[others], E[i]])
        b_ub = np.concatenate([f[others], [f[i] + 1.0]])
        res = linprog(-E[i], A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d, method="highs")
        if res.status == 0 and -res.fun <= f[i] + tol:
            keep[i] = False
    return Polytope(E[keep], f[keep])


def bounding_box(P: Polytope):
    d = P.dim
    if d == 0:
        return np.zeros(0), np.zeros(0)
    if d == 1:
        lo, hi = _interval(P)
        return np.array([lo]), np.array([hi])
    if d == 2:
        V = _polygon(P)
        if V.shape[0] == 0:
            return np.full(2, np.inf), np.full(2, -np.inf)
        lo, hi = V.min(axis=0), V.max(axis=0)
        lo = np.where(lo <= -POLY_BOUND * (1 - 1e-9), -np.inf, lo)
        hi = np.where(hi >= POLY_BOUND * (1 - 1e-9), np.inf, hi)
        return lo, hi
    lo, hi = np.empty(d), np.empty(d)
    for k in range(d):
        c = np.zeros(d)
        c[k] = 1.0
        r1 = linprog(c, A_ub=P.E, b_ub=P.f, bounds=[(None, None)] * d, method="highs")
        r2 = linprog(-c, A_ub=P.E, b_ub=P.f, bounds=[(None, None)] * d, method="highs")
        lo[k] = r1.x[k] if r1.status == 0 else -np.inf
        hi[k] = r2.x[k] if r2.status == 0 else np.inf
    return lo, hi


def sample(P: Polytope, q: int, rng: np.random.Generator, max_tries: int = 200000) -> np.ndarray:
    """``q`` uniform points by rejection from the bounding box."""
    lo, hi = bounding_box(P)
    d = P.dim
    if d == 0:
        return np.zeros((q, 0))
    out = []
    tries = 0
    while len(out) < q:
        if tries > max_tries:
            raise RuntimeError("rejection sampling failed; region too thin")
        batch = rng.uniform(lo, hi, size=(max(q, 16), d))
        tries += batch.shape[0]
        ok = np.all(batch @ P.E.T <= P.f + TOL, axis=1) if P.n_rows else np.ones(batch.shape[0], bool)
        for x in batch[ok]:
            out.append(x)
            if len(out) == q:
                break
    return np.array(out)


def difference(P: Polytope, Q: Polytope, tol: float = INTERIOR_TOL) -> list[Polytope]:
    """``P \\ Q`` as disjoint polytopes with nonempty interior."""
    Qr = normalize(Q)
    if Qr is None:
        return [P]
    pieces = []
    cur = P
    for i in range(Qr.n_rows):
        # part of cur violating row i
        piece = cur.add(-Qr.E[i], -Qr.f[i])
        if has_interior(piece, tol):
            pieces.append(piece)
        cur = cur.add(Qr.E[i], Qr.f[i])
        if not has_interior(cur, tol):
            break
    return pieces


def difference_many(P: Polytope, Qs, tol: float = INTERIOR_TOL) -> list[Polytope]:
    pieces = [P]
    for Q in Qs:
        nxt = []
        for R in pieces:
            if not has_interior(R.intersect(Q), tol):
                nxt.append(R)
            else:
                nxt.extend(difference(R, Q, tol))
        pieces = nxt
        if not pieces:
            break
    return pieces


def facets(P: Polytope):
    """``(row index, normal, offset, relative-interior point)`` per facet.

    ``P`` should already be redundancy-reduced.
    """
    d = P.dim
    out = []
    if d == 0:
        return out
    if d == 1:
        for i in range(P.n_rows):
            e = P.E[i, 0]
            out.append((i, P.E[i], P.f[i], np.array([P.f[i] / e])))
        return out
    if d == 2:
        V = _polygon(P)
        for i in range(P.n_rows):
            on = np.abs(V @ P.E[i] - P.f[i]) <= 1e-9 * max(1.0, abs(P.f[i]))
            pts = V[on]
            if pts.shape[0] >= 2 and np.max(np.ptp(pts, axis=0)) > 1e-10:
                # endpoints of the edge: extreme points along its direction
                t = np.array([-P.E[i, 1], P.E[i, 0]])
                proj = pts @ t
                mid = 0.5 * (pts[np.argmin(proj)] + pts[np.argmax(proj)])
                out.append((i, P.E[i], P.f[i], mid))
        return out
    for i in range(P.n_rows):
        a = P.E[i]
        others = np.delete(np.arange(P.n_rows), i)
        Eo = P.E[others]
        # distance inside the hyperplane: norm of the row projected onto it
        proj = Eo - np.outer(Eo @ a, a) / (a @ a)
        norms = np.linalg.norm(proj, axis=1)
        A_ub = np.hstack([Eo, norms[:, None]])
        c = np.zeros(d + 1)
        c[-1] = -1.0
        res = linprog(
            c, A_ub=A_ub, b_ub=P.f[others], A_eq=np.append(a, 0.0)[None, :],
            b_eq=[P.f[i]], bounds=[(None, None)] * d + [(None, 1e6)], method="highs",
        )
        if res.status == 0 and res.x[-1] > 1e-10:
            out.append((i, a, P.f[i], res.x[:d]))
    return out


def envelope_merge(polys: list[Polytope], tol: float = INTERIOR_TOL) -> list[Polytope]:
    """Greedily merge pieces whose union is convex (envelope test)."""
    polys = [p for p in (reduce(q) for q in polys) if p is not None]
    changed = True
    while changed and len(polys) > 1:
        changed = False
        for a in range(len(polys)):
            for b in range(a + 1, len(polys)):
                m = _try_merge(polys[a], polys[b], tol)
                if m is not None:
                    polys = [p for k, p in enumerate(polys) if k not in (a, b)] + [m]
                    changed = True
                    break
            if changed:
                break
    return polys


def _valid_rows(src: Polytope, dst: Polytope, tol: float):
    idx = []
    for i in range(src.n_rows):
        if _max_over(dst, src.E[i]) <= src.f[i] + 1e-9:
            idx.append(i)
    return idx


def _max_over(P: Polytope, c) -> float:
    if P.dim == 2:
        V = _polygon(P)
        return float(np.max(V @ c)) if V.shape[0] else -np.inf
    if P.dim == 1:
        lo, hi = _interval(P)
        return max(c[0] * lo, c[0] * hi)
    res = linprog(-c, A_ub=P.E, b_ub=P.f, bounds=[(None, None)] * P.dim, method="highs")
    return -res.fun if res.status == 0 else np.inf


def _try_merge(P: Polytope, Q: Polytope, tol: float):
    ip = _valid_rows(P, Q, tol)
    iq = _valid_rows(Q, P, tol)
    env = Polytope(np.vstack([P.E[ip], Q.E[iq]]).reshape(-1, P.dim), np.concatenate([P.f[ip], Q.f[iq]]))
    if not np.all(np.isfinite(bounding_box(env)[0])) or not np.all(np.isfinite(bounding_box(env)[1])):
        return None
    rest = difference_many(env, [P, Q], tol)
    if rest:
        return None
    return reduce(env)


def volume_hint(P: Polytope) -> float:
    """Cheap size measure: Chebyshev radius."""
    return chebyshev(P)[1]


def affine_range(P: Polytope, a, a0: float = 0.0):
    """Minimum and maximum of ``a @ x + a0`` over ``P``."""
    a = np.asarray(a, dtype=float)
    if P.dim == 0 or not np.any(a):
        return a0, a0
    if P.dim == 1:
        lo, hi = _interval(P)
        vals = (a[0] * lo + a0, a[0] * hi + a0)
        return min(vals), max(vals)
    if P.dim == 2:
        V = _polygon(P)
        if V.shape[0] == 0:
            return np.inf, -np.inf
        vals = V @ a + a0
        return float(vals.min()), float(vals.max())
    r1 = linprog(a, A_ub=P.E, b_ub=P.f, bounds=[(None, None)] * P.dim, method="highs")
    r2 = linprog(-a, A_ub=P.E, b_ub=P.f, bounds=[(None, None)] * P.dim, method="highs")
    lo = r1.fun + a0 if r1.status == 0 else -np.inf
    hi = -r2.fun + a0 if r2.status == 0 else np.inf
    return lo, hi


def union_covers(P: Polytope, pieces, tol: float = INTERIOR_TOL) -> bool:
    """Whether ``pieces`` cover ``P`` up to sets without interior."""
    return not difference_many(P, pieces, tol)
