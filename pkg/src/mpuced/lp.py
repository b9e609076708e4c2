"""Fixed-parameter LP solves with multipliers and active-set extraction.

Binary assignments are substituted into the model and their columns
removed, so every basis is square in the free variables.  Rows left without
free columns are dropped when they hold for every parameter value and make
the subproblem infeasible otherwise.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

import scipy.sparse as sp

from .simplex import SPARSE_MIN, _independent_rows, _well_posed, solve_lp
from .standard_form import StandardForm

TOL_FEAS = 1e-7
TOL_KKT = 1e-7
TOL_CS = 1e-6
TOL_ZERO = 1e-8


class BasisError(RuntimeError):
    """No square invertible basis could be built from binding rows."""


def fixed_key(fixed) -> tuple:
    return tuple(sorted((int(j), int(round(v))) for j, v in (fixed or {}).items()))


@dataclass(eq=False)
class ReducedLP:
    """The LP left after substituting fixed binaries.

    ``rows`` maps local inequality rows to rows of the full form.  The right
    side at ``theta`` is ``r0 + P @ theta``.
    """

    form: StandardForm
    fixed: dict
    free: np.ndarray
    rows: np.ndarray
    A: np.ndarray
    r0: np.ndarray
    P: np.ndarray
    E: np.ndarray
    h: np.ndarray
    c: np.ndarray
    const: float
    infeasible_rows: np.ndarray  # full-form rows with no free column that never hold
    A_sparse: object = None

    def r(self, theta) -> np.ndarray:
        return self.r0 + self.P @ np.asarray(theta, dtype=float)


_REDUCE_CACHE: dict = {}


def reduce_problem(form: StandardForm, fixed=None) -> ReducedLP:
    key = (id(form), fixed_key(fixed))
    hit = _REDUCE_CACHE.get(key)
    if hit is not None and hit.form is form:
        return hit
    fixed = {int(j): float(round(v)) for j, v in (fixed or {}).items()}
    allowed = set(int(b) for b in form.binary_idx)
    if form.u_idx is not None:
        allowed |= set(int(b) for b in form.u_idx.ravel()) | set(int(b) for b in form.v_idx.ravel())
    for j, v in fixed.items():
        if j not in allowed:
            raise ValueError(f"column {j} is not binary")
        if v not in (0.0, 1.0):
            raise ValueError(f"fixed value for column {j} must be 0 or 1")
    fcols = np.array(sorted(fixed), dtype=int)
    fvals = np.array([fixed[j] for j in fcols])
    free = np.setdiff1d(np.arange(form.n), fcols)
    base = form.b + form.Fmax_rows
    theta_map = form.theta_map
    if fcols.size:
        base = base - form.A[:, fcols] @ fvals
    Af = form.A[:, free]
    has_col = np.abs(Af).sum(axis=1) > 0
    has_par = form.row_param >= 0
    keep = has_col | has_par
    dead = ~keep
    infeasible_rows = np.flatnonzero(dead & (base < -TOL_FEAS))
    rows = np.flatnonzero(keep)
    Hf = form.H[:, free]
    h = form.h - (form.H[:, fcols] @ fvals if fcols.size else 0.0)
    eq_has = np.abs(Hf).sum(axis=1) > 0
    bad_eq = np.flatnonzero(~eq_has & (np.abs(h) > TOL_FEAS))
    if bad_eq.size:
        infeasible_rows = np.concatenate([infeasible_rows, -1 - bad_eq])
    red = ReducedLP(
        form=form,
        fixed=fixed,
        free=free,
        rows=rows,
        A=Af[rows],
        r0=base[rows],
        P=theta_map[rows],
        E=Hf,
        h=h,
        c=form.M[free],
        const=float(form.M[fcols] @ fvals) if fcols.size else 0.0,
        infeasible_rows=infeasible_rows,
    )
    if red.A.size >= SPARSE_MIN:
        red.A_sparse = sp.csr_matrix(red.A)
    if len(_REDUCE_CACHE) > 4096:
        _REDUCE_CACHE.clear()
    _REDUCE_CACHE[key] = red
    return red


@dataclass
class PrimalDual:
    status: str
    omega: np.ndarray | None
    lam: np.ndarray
    mu: np.ndarray
    objective: float
    theta: np.ndarray
    fixed: dict = field(default_factory=dict)
    basis: tuple = ()  # full-form inequality rows of the final simplex basis
    iterations: int = 0
    farkas: tuple | None = None  # (y over full rows, z over equalities)

    @property
    def lambda_(self):
        return self.lam


@dataclass(frozen=True)
class ActiveSet:
    p1: tuple
    p2: tuple
    degeneracy_flag: bool = False

    def key(self, fixed=None) -> tuple:
        return (self.p1, self.p2, fixed_key(fixed))


_RECORDERS: list = []


@contextlib.contextmanager
def record_kkt():
    """Collect KKT residuals of every optimal solve inside the block."""
    log: list = []
    _RECORDERS.append(log)
    try:
        yield log
    finally:
        _RECORDERS.remove(log)


def solve_fixed(form: StandardForm, theta, fixed=None, basis_hint=None) -> PrimalDual:
    theta = np.asarray(theta, dtype=float).reshape(form.K)
    red = reduce_problem(form, fixed)
    return solve_reduced(red, theta, basis_hint)


def solve_reduced(red: ReducedLP, theta, basis_hint=None) -> PrimalDual:
    form = red.form
    theta = np.asarray(theta, dtype=float).reshape(form.K)
    Num, T = form.num_rows, form.H.shape[0]
    if red.infeasible_rows.size:
        y = np.zeros(Num)
        z = np.zeros(T)
        j = int(red.infeasible_rows[0])
        if j >= 0:
            y[j] = 1.0
        else:
            z[-1 - j] = -np.sign(red.h[-1 - j])
        return PrimalDual("infeasible", None, np.zeros(T), np.zeros(Num), np.nan, theta, dict(red.fixed), farkas=(y, z))
    hint = None
    if basis_hint is not None:
        local = {int(r): i for i, r in enumerate(red.rows)}
        hint = [local[int(r)] for r in basis_hint if int(r) in local]
    res = solve_lp(red.c, red.A, red.r(theta), red.E, red.h, basis_hint=hint, A_sparse=red.A_sparse)
    mu = np.zeros(Num)
    lam = np.zeros(T)
    if res.status == "infeasible":
        y = np.zeros(Num)
        y[red.rows] = res.farkas[0]
        return PrimalDual("infeasible", None, lam, mu, np.nan, theta, dict(red.fixed), iterations=res.iterations, farkas=(y, res.farkas[1].copy()))
    omega = np.zeros(form.n)
    for j, v in red.fixed.items():
        omega[j] = v
    if res.x is not None:
        omega[red.free] = res.x
    if res.status == "unbounded":
        return PrimalDual("unbounded", omega, lam, mu, -np.inf, theta, dict(red.fixed), iterations=res.iterations)
    mu[red.rows] = res.mu
    lam[:] = res.lam
    basis = tuple(int(red.rows[j]) for j in res.basis)
    sol = PrimalDual(
        "optimal", omega, lam, mu, float(form.M @ omega), theta, dict(red.fixed),
        basis=basis, iterations=res.iterations,
    )
    if _RECORDERS:
        resid = kkt_residuals(sol, form)
        for log in _RECORDERS:
            log.append(resid)
    return sol


def kkt_residuals(sol: PrimalDual, form: StandardForm) -> dict:
    """Residuals of stationarity, feasibility, sign, complementarity, duality.

    Stationarity is measured over the free columns only; fixed columns are
    constants of the subproblem.
    """
    red = reduce_problem(form, sol.fixed)
    x = sol.omega[red.free]
    mu = sol.mu[red.rows]
    r = red.r(sol.theta)
    g = red.A @ x - r
    stat = red.c + red.A.T @ mu + red.E.T @ sol.lam
    dual_obj = -(mu @ r) - sol.lam @ red.h
    return {
        "stationarity": float(np.abs(stat).max(initial=0.0)),
        "primal_ineq": float(max(g.max(initial=0.0), 0.0)),
        "primal_eq": float(np.abs(red.E @ x - red.h).max(initial=0.0)),
        "dual_sign": float(max(-mu.min(initial=0.0), 0.0)),
        "complementarity": float(np.abs(mu * g).max(initial=0.0)),
        "duality_gap": float(abs(red.c @ x - dual_obj)),
    }


def binding_rows(sol: PrimalDual, form: StandardForm, tol: float = TOL_FEAS) -> np.ndarray:
    red = reduce_problem(form, sol.fixed)
    g = red.A @ sol.omega[red.free] - red.r(sol.theta)
    return red.rows[g >= -tol]


def extract_active_set(sol: PrimalDual, form: StandardForm, tol: float = TOL_ZERO) -> ActiveSet:
    """Rows with ``mu > tol``, completed by binding rows in ascending order.

    Any completion keeps the multipliers of ``sol``, since they solve the
    square stationarity system of the enlarged basis as well.
    """
    if sol.status != "optimal":
        raise ValueError("active set requires an optimal solution")
    red = reduce_problem(form, sol.fixed)
    n = red.free.size
    local = {int(r): i for i, r in enumerate(red.rows)}
    p2 = tuple(range(form.H.shape[0]))
    # equalities without free columns were folded away
    eq_live = [t for t in p2 if np.abs(red.E[t]).sum() > 0]
    p1_strict = [int(r) for r in np.flatnonzero(sol.mu > tol)]
    binding = [int(r) for r in binding_rows(sol, form, tol=1e-9)]
    need = n
    strict_set = set(p1_strict)
    ordered = [("eq", t) for t in eq_live] + [("in", r) for r in p1_strict] + [("in", r) for r in binding if r not in strict_set]
    n_strict = len(eq_live) + len(p1_strict)
    if n_strict == need and _well_posed(np.vstack([red.E[eq_live]] + [red.A[[local[r] for r in p1_strict]]])):
        return ActiveSet(p1=tuple(sorted(p1_strict)), p2=tuple(eq_live), degeneracy_flag=False)
    if ordered:
        M = np.vstack([red.E[idx] if kind == "eq" else red.A[local[idx]] for kind, idx in ordered])
    else:
        M = np.zeros((0, n))
    picked, _ = _independent_rows(M, range(len(ordered)), need, thresh=1e-9)
    chosen = [ordered[i] for i in picked]
    if len(chosen) < need:
        raise BasisError(
            f"only {len(chosen)} independent binding rows for {need} free variables"
        )
    p1 = tuple(sorted(idx for kind, idx in chosen if kind == "in"))
    # a strict row was dependent or did not fit, or binding rows filled the basis
    flag = set(p1) != strict_set
    return ActiveSet(p1=p1, p2=tuple(eq_live), degeneracy_flag=flag)


def basis_active_set(sol: PrimalDual, form: StandardForm) -> ActiveSet:
    """Active set read directly from the final simplex basis."""
    red = reduce_problem(form, sol.fixed)
    eq_live = tuple(t for t in range(form.H.shape[0]) if np.abs(red.E[t]).sum() > 0)
    p1 = tuple(sorted(sol.basis))
    strict = set(int(r) for r in np.flatnonzero(sol.mu > TOL_ZERO))
    return ActiveSet(p1=p1, p2=eq_live, degeneracy_flag=set(p1) != strict)
