"""Brute-force reference: enumerate binaries, solve each fixed LP with HiGHS.

Independent of the package's simplex and of the parametric machinery.  For
a given ``theta`` every binary assignment that satisfies the rows involving
only binaries is considered; assignments are visited in order of a cheap
lower bound (fixed costs plus a network-free merit-order dispatch) and the
scan stops once that bound reaches the best value found, which keeps the
result exact.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from .standard_form import StandardForm

MAX_BINARIES = 20


class OracleRefused(ValueError):
    pass


class BruteForce:
    def __init__(self, form: StandardForm, max_binaries: int = MAX_BINARIES):
        if form.u_idx is None:
            bins = np.asarray(form.binary_idx, dtype=int)
        else:
            bins = np.concatenate([form.u_idx.ravel(), form.v_idx.ravel()]).astype(int)
        if bins.size > max_binaries:
            raise OracleRefused(
                f"{bins.size} binaries exceed the enumeration limit of {max_binaries}; "
                "use a smaller case or compare at sampled points with a MILP solver"
            )
        self.form = form
        self.bins = bins
        self.cont = np.setdiff1d(np.arange(form.n), bins)
        A = form.A
        touches_cont = np.abs(A[:, self.cont]).sum(axis=1) > 0
        par = form.row_param >= 0
        self.mixed_rows = np.flatnonzero(touches_cont | par)
        self.bin_rows = np.flatnonzero(~(touches_cont | par))
        # binaries that appear in rows with continuous variables
        self.linked = np.flatnonzero(np.abs(A[np.ix_(self.mixed_rows, bins)]).sum(axis=0) > 0)
        self.assignments = self._feasible_assignments()
        self._lp_cache: dict = {}

    def _feasible_assignments(self):
        f = self.form
        out = []
        Ab = f.A[np.ix_(self.bin_rows, self.bins)]
        bb = f.b[self.bin_rows] + f.Fmax_rows[self.bin_rows]
        for bits in itertools.product((0.0, 1.0), repeat=self.bins.size):
            x = np.array(bits)
            if Ab.size and np.any(Ab @ x > bb + 1e-9):
                continue
            out.append(x)
        return out

    def _bound(self, x) -> float:
        """Fixed costs plus per-period merit-order dispatch (no network)."""
        f = self.form
        cost = float(f.M[self.bins] @ x)
        if f.u_idx is None or f.g_idx is None:
            return -np.inf
        omega = np.zeros(f.n)
        omega[self.bins] = x
        U = omega[f.u_idx]
        N, T = U.shape
        C = f.M[f.g_idx]
        lo_rows = list(f.block("gen_lower"))
        up_rows = list(f.block("gen_upper"))
        Gmin = f.A[lo_rows][:, f.u_idx.ravel()].diagonal().reshape(N, T) if lo_rows else np.zeros((N, T))
        Gmax = -f.A[up_rows][:, f.u_idx.ravel()].diagonal().reshape(N, T) if up_rows else np.full((N, T), np.inf)
        D = f.h
        for t in range(T):
            lo = Gmin[:, t] * U[:, t]
            hi = Gmax[:, t] * U[:, t]
            if lo.sum() > D[t] + 1e-9 or hi.sum() < D[t] - 1e-9:
                return np.inf
            rest = D[t] - lo.sum()
            cost += float(C[:, t] @ lo)
            for i in np.argsort(C[:, t], kind="stable"):
                take = min(hi[i] - lo[i], rest)
                cost += C[i, t] * take
                rest -= take
                if rest <= 0:
                    break
        return cost

    def fixed_lp(self, x, theta) -> float:
        """LP value (continuous part plus binary costs) with binaries at ``x``."""
        f = self.form
        theta = np.asarray(theta, dtype=float)
        key = (tuple(x[self.linked]), tuple(np.round(theta, 15)))
        if key not in self._lp_cache:
            rows = self.mixed_rows
            rhs = f.rhs(theta)[rows] - f.A[np.ix_(rows, self.bins)] @ x
            A = f.A[np.ix_(rows, self.cont)]
            E = f.H[:, self.cont]
            h = f.h - f.H[:, self.bins] @ x
            res = linprog(
                f.M[self.cont], A_ub=A, b_ub=rhs, A_eq=E, b_eq=h,
                bounds=[(None, None)] * self.cont.size, method="highs",
            )
            self._lp_cache[key] = res.fun if res.status == 0 else np.inf
        return self._lp_cache[key] + float(f.M[self.bins] @ x)

    def value(self, theta) -> tuple:
        """``(best value, best assignment)``; ``(inf, None)`` if infeasible."""
        scored = sorted(((self._bound(x), k) for k, x in enumerate(self.assignments)), key=lambda t: (t[0], t[1]))
        best, arg = np.inf, None
        for lb, k in scored:
            if lb == np.inf or lb >= best - 1e-12:
                break
            v = self.fixed_lp(self.assignments[k], theta)
            if v < best:
                best, arg = v, self.assignments[k]
        return best, arg


def grid_points(form: StandardForm, grid: int) -> np.ndarray:
    box = np.asarray(form.theta_box, dtype=float)
    axes = [np.linspace(lo, hi, grid) if hi > lo else np.array([lo]) for lo, hi in box]
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def compare(form: StandardForm, value_fn, grid: int = 11) -> dict:
    """Max deviation between ``value_fn`` and brute force on a grid."""
    bf = BruteForce(form)
    worst, worst_pt, rows = 0.0, None, []
    for theta in grid_points(form, grid):
        ref, _ = bf.value(theta)
        got = value_fn(theta)
        if np.isinf(ref) and np.isinf(got):
            dev = 0.0
        elif np.isinf(ref) or np.isinf(got):
            dev = np.inf
        else:
            dev = abs(ref - got)
        rows.append((theta.tolist(), ref, got, dev))
        if dev > worst or worst_pt is None:
            worst, worst_pt = max(worst, dev), theta.tolist()
    return {"max_deviation": worst, "worst_point": worst_pt, "points": rows}
