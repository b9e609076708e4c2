"""Active-set primal simplex for inequality-form LPs.

Solves ``min c @ x  s.t.  A @ x <= r,  E @ x = h`` with ``x`` free.  A vertex
is described by a working set of ``n`` linearly independent rows (all
equalities plus ``n - m_eq`` inequalities) held with equality.  Multipliers
follow from ``B.T @ u = -c``; a negative inequality multiplier names the
row to release, a ratio test names the row to add.  ``B^-1`` is updated by a
rank-one column rule and refactored periodically.

Phase I adds one artificial variable ``tau`` that relaxes every inequality
outside the crash basis; its dual at the optimum is a Farkas certificate
when ``tau* > 0``.  A warm start whose basis is dual feasible (the usual
case after a right-hand-side change) skips Phase I and runs dual simplex
pivots instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import blas

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
HARRIS_TOL = 1e-9
FEAS_TOL = 1e-7
REFACTOR_EVERY = 64
DUAL_FEAS_TOL = 1e-11  # entering threshold of dual pivots, relative to the largest rhs
SPARSE_MIN = 20000  # use a CSR copy of A for matrix-vector products above this size


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    mu: np.ndarray
    lam: np.ndarray
    objective: float
    basis: tuple = ()  # inequality rows held in the final working set
    iterations: int = 0
    farkas: tuple | None = None  # (y, z): y @ A + z @ E = 0, y >= 0, y @ r + z @ h < 0


class _Stall(Exception):
    pass


def _independent_rows(M: np.ndarray, candidates, need: int, Q=None, tol=1e-9, thresh=None):
    """Greedy Gram-Schmidt selection of up to ``need`` independent rows.

    ``Q`` holds orthonormal rows already spanned; the returned basis extends it.
    """
    n = M.shape[1]
    k0 = 0 if Q is None else len(Q)
    buf = np.empty((k0 + max(need, 0), n))
    if k0:
        buf[:k0] = Q
    k = k0
    if thresh is None:
        thresh = max(tol * max(1.0, np.sqrt(n)), tol)
    chosen = []
    for j in candidates:
        if len(chosen) >= need:
            break
        a = M[j]
        na = np.linalg.norm(a)
        if na == 0.0:
            continue
        v = a / na
        if k:
            Qm = buf[:k]
            v = v - (Qm @ v) @ Qm
            v = v - (Qm @ v) @ Qm
        nv = np.linalg.norm(v)
        if nv > thresh:
            buf[k] = v / nv
            k += 1
            chosen.append(int(j))
    return chosen, buf[:k]


def _well_posed(B, limit=1e10) -> bool:
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return False
    return bool(np.abs(B).sum(axis=0).max() * np.abs(Binv).sum(axis=0).max() < limit)


def _crash(A, E, hint, n):
    """Independent equalities, then ``hint`` rows, then singleton rows, then the rest."""
    m = A.shape[0]
    eq_rows, Q = _independent_rows(E, range(E.shape[0]), n)
    need = n - len(eq_rows)
    order = []
    seen = set()
    if hint is not None:
        full = sorted(set(int(j) for j in hint if 0 <= int(j) < m))
        if len(full) == need and _well_posed(np.vstack([E[eq_rows], A[full]])):
            return eq_rows, full
        for j in hint:
            j = int(j)
            if 0 <= j < m and j not in seen:
                order.append(j)
                seen.add(j)
    nnz = (A != 0).sum(axis=1)
    for j in np.argsort(nnz, kind="stable"):
        j = int(j)
        if j not in seen:
            order.append(j)
            seen.add(j)
    rows, _ = _independent_rows(A, order, need, Q=Q)
    return eq_rows, rows


class _Tableau:
    """Working set bookkeeping: B = [E[eq]; A[W]] and its inverse."""

    def __init__(self, A, r, E, h, eq_rows, W, As=None):
        self.A, self.r, self.E, self.h = A, r, E, h
        self.As = A if As is None else As
        self.eq_rows = list(eq_rows)
        self.me = len(self.eq_rows)
        self.W = list(W)
        self.refactor()

    def matrix(self):
        return np.vstack([self.E[self.eq_rows], self.A[self.W]]) if self.W or self.eq_rows else np.zeros((0, self.A.shape[1]))

    def rhs(self):
        return np.concatenate([self.h[self.eq_rows], self.r[self.W]])

    def refactor(self):
        B = self.matrix()
        self.Binv = np.asfortranarray(np.linalg.inv(B))
        self.x = np.linalg.solve(B, self.rhs())
        self.since = 0

    def multipliers(self, c):
        return -self.Binv.T @ c

    def replace(self, pos, j):
        alpha = self.A[j] @ self.Binv
        col = self.Binv[:, pos] / alpha[pos]
        if self.Binv.flags.f_contiguous:
            self.Binv = blas.dger(-1.0, col, alpha, a=self.Binv, overwrite_a=True)
        else:
            self.Binv -= np.outer(col, alpha)
        self.Binv[:, pos] = col
        self.W[pos - self.me] = int(j)
        self.since += 1
        if self.since >= REFACTOR_EVERY:
            self.refactor()


def _iterate(tab: _Tableau, c, max_iter):
    """Primal simplex from a feasible vertex.  Returns (status, iterations)."""
    A, r = tab.As, tab.r
    m = A.shape[0]
    in_basis = np.zeros(m, dtype=bool)
    in_basis[tab.W] = True
    degenerate_run = 0
    bland = False
    n = A.shape[1]
    for it in range(max_iter):
        u = tab.multipliers(c)
        mu_w = u[tab.me:]
        neg = np.flatnonzero(mu_w < -OPT_TOL * max(1.0, np.abs(c).max(initial=0.0)))
        if neg.size == 0:
            return "optimal", it
        if bland:
            q = int(neg[np.argmin([tab.W[k] for k in neg])])
        else:
            q = int(neg[np.argmin(mu_w[neg])])
        pos = tab.me + q
        d = -tab.Binv[:, pos]
        Ad = A @ d
        Ad[in_basis] = 0.0
        cand = np.flatnonzero(Ad > PIVOT_TOL)
        if cand.size == 0:
            return "unbounded", it
        s = np.maximum(r[cand] - (A @ tab.x)[cand], 0.0)
        ratios = s / Ad[cand]
        if bland:
            tmin = ratios.min()
            ties = cand[ratios <= tmin + 1e-12]
            j = int(ties.min())
            t = float(tmin)
        else:
            tmax = ((s + HARRIS_TOL) / Ad[cand]).min()
            elig = np.flatnonzero(ratios <= tmax)
            k = elig[np.argmax(Ad[cand][elig])]
            j = int(cand[k])
            t = float(ratios[k])
        if t <= 1e-12:
            degenerate_run += 1
            if degenerate_run > n:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        tab.x = tab.x + t * d
        old = tab.W[q]
        in_basis[old] = False
        in_basis[j] = True
        tab.replace(pos, j)
    raise _Stall(f"simplex did not converge in {max_iter} iterations")


def _dual_iterate(tab: _Tableau, c, max_iter, scale):
    """Dual simplex from a dual-feasible working set.

    Returns (status, iterations, farkas).  The most violated row enters; the
    leaving row keeps every inequality multiplier nonnegative.
    """
    A, r = tab.As, tab.r
    m = tab.A.shape[0]
    in_basis = np.zeros(m, dtype=bool)
    in_basis[tab.W] = True
    me = tab.me
    for it in range(max_iter):
        viol = A @ tab.x - r
        viol[in_basis] = -np.inf
        j = int(np.argmax(viol)) if m else 0
        if m == 0 or viol[j] <= DUAL_FEAS_TOL * scale:
            return "optimal", it, None
        alpha = tab.A[j] @ tab.Binv
        aw = alpha[me:]
        cand = np.flatnonzero(aw > PIVOT_TOL)
        if cand.size == 0:
            y = np.zeros(m)
            y[j] = 1.0
            y[tab.W] = np.maximum(-aw, 0.0)
            z = np.zeros(tab.E.shape[0])
            z[tab.eq_rows] = -alpha[:me]
            return "infeasible", it, (y, z)
        mu_w = np.maximum(tab.multipliers(c)[me:], 0.0)
        ratios = mu_w[cand] / aw[cand]
        tmax = ((mu_w[cand] + HARRIS_TOL) / aw[cand]).min()
        elig = np.flatnonzero(ratios <= tmax)
        q = int(cand[elig[np.argmax(aw[cand][elig])]])
        pos = me + q
        step = viol[j] / alpha[pos]
        tab.x = tab.x - step * tab.Binv[:, pos]
        in_basis[tab.W[q]] = False
        in_basis[j] = True
        tab.replace(pos, j)
    raise _Stall(f"dual simplex did not converge in {max_iter} iterations")


def solve_lp(c, A, r, E=None, h=None, basis_hint=None, max_iter=None, A_sparse=None) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A = np.asarray(A, dtype=float).reshape(-1, n)
    r = np.asarray(r, dtype=float).reshape(-1)
    E = np.zeros((0, n)) if E is None else np.asarray(E, dtype=float).reshape(-1, n)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float).reshape(-1)
    m, me = A.shape[0], E.shape[0]
    if max_iter is None:
        max_iter = 50 * (n + m) + 1000

    if n == 0:
        return _trivial(r, h)

    if A_sparse is not None:
        As = A_sparse
    else:
        As = sp.csr_matrix(A) if m * n >= SPARSE_MIN else A
    eq_rows, W0 = _crash(A, E, basis_hint, n)
    if len(eq_rows) + len(W0) < n:
        return _rank_deficient(c, A, E)
    tab = _Tableau(A, r, E, h, eq_rows, W0, As)
    x0 = tab.x
    eq_resid = np.abs(E @ x0 - h).max(initial=0.0)
    if eq_resid > FEAS_TOL * max(1.0, np.abs(h).max(initial=0.0)):
        # dependent equalities that are inconsistent
        return _infeasible_eq(E, h, eq_rows, m, me)
    viol = As @ x0 - r
    viol[W0] = -np.inf
    its = 0
    scale = max(1.0, np.abs(r).max(initial=0.0), np.abs(h).max(initial=0.0))
    if viol.max(initial=-np.inf) > 0.0 and basis_hint is not None:
        mu_w = tab.multipliers(c)[tab.me:]
        if (mu_w >= -OPT_TOL * max(1.0, np.abs(c).max(initial=0.0))).all():
            try:
                status, its, farkas = _dual_iterate(tab, c, max_iter, scale)
            except _Stall:
                status, farkas = "stall", None
                tab = _Tableau(A, r, E, h, eq_rows, W0, As)
            if status == "infeasible":
                return LPResult("infeasible", None, np.zeros(m), np.zeros(me), np.nan, (), its, farkas)
            if status == "optimal":
                viol = np.full(m, -np.inf)
    if viol.max(initial=-np.inf) > 0.0:
        status, tab, its, farkas = _phase_one(c, A, r, E, h, eq_rows, W0, x0, viol, max_iter, As)
        if status == "infeasible":
            y, z = farkas
            return LPResult("infeasible", None, np.zeros(m), np.zeros(me), np.nan, (), its, (y, z))
    status, it2 = _iterate(tab, c, max_iter)
    its += it2
    if status == "unbounded":
        return LPResult("unbounded", tab.x.copy(), np.zeros(m), np.zeros(me), -np.inf, tuple(tab.W), its)
    return _polish(c, A, r, E, h, tab, its)


def _polish(c, A, r, E, h, tab, its):
    B = tab.matrix()
    x = np.linalg.solve(B, tab.rhs())
    u = np.linalg.solve(B.T, -c)
    m, me = A.shape[0], E.shape[0]
    mu = np.zeros(m)
    lam = np.zeros(me)
    lam[tab.eq_rows] = u[: tab.me]
    mu[tab.W] = u[tab.me:]
    mu[np.abs(mu) < 1e-13] = 0.0
    lam[np.abs(lam) < 1e-13] = 0.0
    return LPResult("optimal", x, mu, lam, float(c @ x), tuple(tab.W), its)


def _phase_one(c, A, r, E, h, eq_rows, W0, x0, viol, max_iter, As=None):
    m, n = A.shape
    relaxed = np.ones(m, dtype=bool)
    relaxed[W0] = False
    A1 = np.zeros((m + 1, n + 1))
    A1[:m, :n] = A
    A1[:m, n] = -relaxed.astype(float)
    A1[m, n] = -1.0
    r1 = np.concatenate([r, [0.0]])
    E1 = np.hstack([E, np.zeros((E.shape[0], 1))])
    c1 = np.zeros(n + 1)
    c1[n] = 1.0
    jstar = int(np.argmax(viol))
    As1 = sp.csr_matrix(A1) if As is not None and sp.issparse(As) else None
    tab1 = _Tableau(A1, r1, E1, h, eq_rows, list(W0) + [jstar], As1)
    status, its = _iterate(tab1, c1, max_iter)
    tau = float(tab1.x[n])
    scale = max(1.0, np.abs(r).max(initial=0.0), np.abs(h).max(initial=0.0))
    if tau > FEAS_TOL * scale:
        B = tab1.matrix()
        u = np.linalg.solve(B.T, -c1)
        y = np.zeros(m + 1)
        z = np.zeros(E.shape[0])
        z[eq_rows] = u[: tab1.me]
        y[tab1.W] = u[tab1.me:]
        return "infeasible", None, its, (np.maximum(y[:m], 0.0), z)
    if m not in tab1.W:
        alpha = -tab1.Binv[n, :]
        scores = np.abs(alpha[tab1.me:])
        pos = tab1.me + int(np.argmax(scores))
        tab1.replace(pos, m)
    W = [j for j in tab1.W if j != m]
    tab = _Tableau(A, r, E, h, eq_rows, W, As)
    return "feasible", tab, its, None


def _trivial(r, h):
    m, me = r.size, h.size
    if (r >= -FEAS_TOL).all() and (np.abs(h) <= FEAS_TOL).all():
        return LPResult("optimal", np.zeros(0), np.zeros(m), np.zeros(me), 0.0)
    y = np.zeros(m)
    z = np.zeros(me)
    if (r < -FEAS_TOL).any():
        y[int(np.argmin(r))] = 1.0
    else:
        j = int(np.argmax(np.abs(h)))
        z[j] = -np.sign(h[j])
    return LPResult("infeasible", None, np.zeros(m), np.zeros(me), np.nan, (), 0, (y, z))


def _rank_deficient(c, A, E):
    # No vertex exists.  The LP is unbounded unless c lies in the row space.
    M = np.vstack([A, E])
    sol, *_ = np.linalg.lstsq(M.T, -c, rcond=None)
    if np.abs(M.T @ sol + c).max() > 1e-9:
        return LPResult("unbounded", None, np.zeros(A.shape[0]), np.zeros(E.shape[0]), -np.inf)
    raise ValueError("constraint matrix lacks full column rank; no vertex solution exists")


def _infeasible_eq(E, h, eq_rows, m, me):
    # h is not in the range of E: z orthogonal to range(E) with z @ h != 0.
    z = h - E @ np.linalg.lstsq(E, h, rcond=None)[0]
    z = -z / max(np.abs(z).max(), 1e-300)
    return LPResult("infeasible", None, np.zeros(m), np.zeros(me), np.nan, (), 0, (np.zeros(m), z))
