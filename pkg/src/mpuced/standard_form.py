"""Matrix standard form of the UCED planning model.

The model is written as::

    min  M @ w
    s.t. A @ w <= b + Fmax_rows + Theta @ theta
         H @ w  = H @ Dhat

with ``w = (G, U, V)``.  ``G`` and ``U`` are ``N*T`` blocks ordered
generator-major (``G[0,0..T-1], G[1,0..T-1], ...``); ``V`` covers periods
``2..T`` only.  Inequality rows are emitted block by block in a fixed order
(see ``BLOCK_ORDER``); a block whose index range is empty emits nothing.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .case import UcedCase, validate_case

BLOCK_ORDER = (
    "flow",
    "ramp_up",
    "shutdown",
    "ramp_down",
    "state_transition",
    "min_on",
    "min_off",
    "gen_lower",
    "gen_upper",
    "u_lower",
    "u_upper",
    "v_lower",
    "v_upper",
)


@dataclass(frozen=True, eq=False)
class StandardForm:
    M: np.ndarray
    A: np.ndarray
    b: np.ndarray
    Fmax_rows: np.ndarray
    H: np.ndarray
    Dhat: np.ndarray
    binary_idx: np.ndarray
    row_param: np.ndarray  # -1 for rows without a parameter
    theta_box: np.ndarray
    blocks: tuple = ()  # (name, start, stop)
    row_labels: tuple = ()
    u_idx: np.ndarray | None = None  # N x T column indices
    v_idx: np.ndarray | None = None  # N x (T-1) column indices
    g_idx: np.ndarray | None = None
    Ton: np.ndarray | None = None
    Toff: np.ndarray | None = None
    U0: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def K(self) -> int:
        return self.theta_box.shape[0]

    @property
    def h(self) -> np.ndarray:
        return self.H @ self.Dhat

    @property
    def theta_map(self) -> np.ndarray:
        """``Num x K`` 0/1 matrix placing each line's parameter on its rows."""
        out = np.zeros((self.num_rows, self.K))
        rows = np.flatnonzero(self.row_param >= 0)
        out[rows, self.row_param[rows]] = 1.0
        return out

    def rhs(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(self.K)
        return self.b + self.Fmax_rows + self.theta_map @ theta

    def block(self, name: str) -> range:
        for bname, start, stop in self.blocks:
            if bname == name:
                return range(start, stop)
        return range(0)

    def branch_candidates(self) -> list[int]:
        """U columns in period-major order (U11, U21, U12, ...)."""
        if self.u_idx is None:
            return [int(j) for j in self.binary_idx]
        N, T = self.u_idx.shape
        return [int(self.u_idx[i, t]) for t in range(T) for i in range(N)]


def expected_row_count(case: UcedCase) -> int:
    """Closed-form row count ``KT + 12NT - 4N - sum(Ton + Toff)``."""
    N, K, T = case.N, case.K, case.T
    return int(K * T + 12 * N * T - 4 * N - np.sum(case.Ton + case.Toff))


def assemble_standard_form(case: UcedCase) -> StandardForm:
    validate_case(case)
    N, K, T = case.N, case.K, case.T
    nG = N * T
    nV = N * (T - 1)
    n = 2 * nG + nV
    g_idx = np.arange(nG).reshape(N, T)
    u_idx = nG + np.arange(nG).reshape(N, T)
    v_full = np.full((N, T), -1, dtype=int)  # v_full[i, t] valid for t >= 1
    if T > 1:
        v_full[:, 1:] = 2 * nG + np.arange(nV).reshape(N, T - 1)

    rows: list[dict] = []
    rhs: list[float] = []
    fmax: list[float] = []
    params: list[int] = []
    labels: list[str] = []
    blocks = []

    def emit(coefs: dict, b_val: float, label: str, f_val=0.0, k=-1):
        rows.append(coefs)
        rhs.append(float(b_val))
        fmax.append(float(f_val))
        params.append(k)
        labels.append(label)

    def start_block(name):
        blocks.append([name, len(rows), None])

    def end_block():
        blocks[-1][2] = len(rows)

    Gmax, Gmin = case.Gmax, case.Gmin
    SR, UR, SD, DR = case.SR, case.UR, case.SD, case.DR
    U0, G0 = case.U0, case.G0

    start_block("flow")
    for k in range(K):
        for t in range(T):
            coefs = {int(g_idx[i, t]): case.GSF[k, i] for i in range(N) if case.GSF[k, i] != 0}
            emit(coefs, case.GSF[k] @ case.D[:, t], f"flow[k={k},t={t}]", case.Fmax[k], k)
    end_block()

    multi = T > 1
    start_block("ramp_up")
    if multi:
        for i in range(N):
            for t in range(T):
                c = {int(g_idx[i, t]): 1.0}
                _add(c, u_idx[i, t], -(SR[i] - Gmax[i, t]))
                r = Gmax[i, t]
                if t > 0:
                    _add(c, g_idx[i, t - 1], -1.0)
                    _add(c, u_idx[i, t - 1], -(UR[i] - SR[i]))
                else:
                    r += G0[i] + (UR[i] - SR[i]) * U0[i]
                emit(c, r, f"ramp_up[i={i},t={t}]")
    end_block()

    start_block("shutdown")
    if multi:
        for i in range(N):
            for t in range(T - 1):
                c = {int(g_idx[i, t]): 1.0}
                _add(c, u_idx[i, t + 1], -(Gmax[i, t] - SD[i]))
                _add(c, u_idx[i, t], -SD[i])
                emit(c, 0.0, f"shutdown[i={i},t={t}]")
    end_block()

    start_block("ramp_down")
    if multi:
        for i in range(N):
            for t in range(T):
                c = {int(g_idx[i, t]): -1.0}
                _add(c, u_idx[i, t], -(DR[i] - SD[i]))
                r = Gmax[i, t]
                if t > 0:
                    _add(c, g_idx[i, t - 1], 1.0)
                    _add(c, u_idx[i, t - 1], -(SD[i] - Gmax[i, t]))
                else:
                    r += -G0[i] + (SD[i] - Gmax[i, t]) * U0[i]
                emit(c, r, f"ramp_down[i={i},t={t}]")
    end_block()

    start_block("state_transition")
    if multi:
        for i in range(N):
            for t in range(1, T):
                c = {int(u_idx[i, t]): 1.0}
                _add(c, u_idx[i, t - 1], -1.0)
                _add(c, v_full[i, t], -1.0)
                emit(c, 0.0, f"state_transition[i={i},t={t}]")
    end_block()

    start_block("min_on")
    if multi:
        for i in range(N):
            ton = int(case.Ton[i])
            if ton < 1:
                continue
            for t in range(ton, T):
                c = {int(v_full[i, k]): 1.0 for k in range(t - ton + 1, t + 1)}
                _add(c, u_idx[i, t], -1.0)
                emit(c, 0.0, f"min_on[i={i},t={t}]")
    end_block()

    start_block("min_off")
    if multi:
        for i in range(N):
            toff = int(case.Toff[i])
            if toff < 1:
                continue
            for t in range(toff, T):
                c = {int(v_full[i, k]): 1.0 for k in range(t - toff + 1, t + 1)}
                _add(c, u_idx[i, t - toff], 1.0)
                emit(c, 1.0, f"min_off[i={i},t={t}]")
    end_block()

    start_block("gen_lower")
    for i in range(N):
        for t in range(T):
            c = {int(g_idx[i, t]): -1.0}
            _add(c, u_idx[i, t], Gmin[i, t])
            emit(c, 0.0, f"gen_lower[i={i},t={t}]")
    end_block()
    start_block("gen_upper")
    for i in range(N):
        for t in range(T):
            c = {int(g_idx[i, t]): 1.0}
            _add(c, u_idx[i, t], -Gmax[i, t])
            emit(c, 0.0, f"gen_upper[i={i},t={t}]")
    end_block()
    start_block("u_lower")
    for i in range(N):
        for t in range(T):
            emit({int(u_idx[i, t]): -1.0}, 0.0, f"u_lower[i={i},t={t}]")
    end_block()
    start_block("u_upper")
    for i in range(N):
        for t in range(T):
            emit({int(u_idx[i, t]): 1.0}, 1.0, f"u_upper[i={i},t={t}]")
    end_block()
    start_block("v_lower")
    for i in range(N):
        for t in range(1, T):
            emit({int(v_full[i, t]): -1.0}, 0.0, f"v_lower[i={i},t={t}]")
    end_block()
    start_block("v_upper")
    for i in range(N):
        for t in range(1, T):
            emit({int(v_full[i, t]): 1.0}, 1.0, f"v_upper[i={i},t={t}]")
    end_block()

    A = np.zeros((len(rows), n))
    for r, coefs in enumerate(rows):
        for j, v in coefs.items():
            A[r, j] = v

    M = np.concatenate([case.C.ravel(), case.UC.ravel(), case.SC.ravel()])
    H = np.zeros((T, n))
    for t in range(T):
        H[t, g_idx[:, t]] = 1.0
    Dhat = np.concatenate([case.D.ravel(), np.zeros(nG + nV)])
    binary_idx = np.arange(nG, n)

    return StandardForm(
        M=M,
        A=A,
        b=np.array(rhs),
        Fmax_rows=np.array(fmax),
        H=H,
        Dhat=Dhat,
        binary_idx=binary_idx,
        row_param=np.array(params, dtype=int),
        theta_box=np.asarray(case.theta_box, dtype=float).copy(),
        blocks=tuple((b[0], b[1], b[2]) for b in blocks),
        row_labels=tuple(labels),
        u_idx=u_idx,
        v_idx=v_full[:, 1:].copy(),
        g_idx=g_idx,
        Ton=case.Ton.copy(),
        Toff=case.Toff.copy(),
        U0=case.U0.copy(),
    )


def _add(coefs: dict, j, value: float) -> None:
    j = int(j)
    if value == 0.0:
        return
    coefs[j] = coefs.get(j, 0.0) + value
    if coefs[j] == 0.0:
        del coefs[j]


def parameter_rows(form: StandardForm) -> list[tuple[int, int]]:
    """``(row, line)`` pairs for the parameterized rows, grouped by line."""
    rows = np.flatnonzero(form.row_param >= 0)
    return sorted(((int(r), int(form.row_param[r])) for r in rows), key=lambda p: (p[1], p[0]))


def relax_binaries(form: StandardForm) -> StandardForm:
    """Continuous relaxation: the 0/1 bound rows already in ``A`` remain."""
    return dataclasses.replace(form, binary_idx=np.array([], dtype=int))


def objective_by_parts(case: UcedCase, G, U, V) -> float:
    """Objective evaluated term by term from the model definition."""
    G, U = np.asarray(G).reshape(case.N, case.T), np.asarray(U).reshape(case.N, case.T)
    V = np.asarray(V).reshape(case.N, case.T - 1)
    return float(np.sum(case.C * G) + np.sum(case.UC * U) + np.sum(case.SC * V))


def constraint_violation(case: UcedCase, G, U, V, theta) -> float:
    """Largest violation of the model constraints written one by one.

    Used to cross-check the matrix encoding independently of ``assemble``.
    """
    N, T = case.N, case.T
    G = np.asarray(G, dtype=float).reshape(N, T)
    U = np.asarray(U, dtype=float).reshape(N, T)
    Vf = np.zeros((N, T))
    if T > 1:
        Vf[:, 1:] = np.asarray(V, dtype=float).reshape(N, T - 1)
    theta = np.asarray(theta, dtype=float)
    worst = 0.0

    def le(lhs, rhs_):
        nonlocal worst
        worst = max(worst, lhs - rhs_)

    for t in range(T):
        worst = max(worst, abs(G[:, t].sum() - case.D[:, t].sum()))
        for k in range(case.K):
            le(case.GSF[k] @ (G[:, t] - case.D[:, t]), case.Fmax[k] + theta[k])
    Gp = np.column_stack([case.G0, G[:, :-1]])
    Up = np.column_stack([case.U0, U[:, :-1]])
    for i in range(N):
        for t in range(T):
            gmx = case.Gmax[i, t]
            if T > 1:
                le(G[i, t] - Gp[i, t] - (case.SR[i] - gmx) * U[i, t] - (case.UR[i] - case.SR[i]) * Up[i, t], gmx)
                le(Gp[i, t] - G[i, t] - (case.DR[i] - case.SD[i]) * U[i, t] - (case.SD[i] - gmx) * Up[i, t], gmx)
                if t < T - 1:
                    le(G[i, t] - (gmx - case.SD[i]) * U[i, t + 1] - case.SD[i] * U[i, t], 0.0)
                if t >= 1:
                    le(U[i, t] - U[i, t - 1], Vf[i, t])
                ton, toff = int(case.Ton[i]), int(case.Toff[i])
                if ton >= 1 and t >= ton:
                    le(Vf[i, t - ton + 1:t + 1].sum() - U[i, t], 0.0)
                if toff >= 1 and t >= toff:
                    le(Vf[i, t - toff + 1:t + 1].sum() + U[i, t - toff], 1.0)
                if t >= 1:
                    le(-Vf[i, t], 0.0)
                    le(Vf[i, t], 1.0)
            le(case.Gmin[i, t] * U[i, t], G[i, t])
            le(G[i, t], gmx * U[i, t])
            le(-U[i, t], 0.0)
            le(U[i, t], 1.0)
    return worst
