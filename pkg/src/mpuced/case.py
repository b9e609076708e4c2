"""UCED planning case: data container, validation and JSON I/O.

Arrays follow the on-disk layout: generator-indexed arrays are ``N x T``
(row ``i`` is generator/bus ``i``), the shift-factor matrix is ``K x N``.
All indices are 0-based.  Startup costs are only defined for periods
``2..T`` and are stored as an ``N x (T-1)`` array.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np


class CaseError(ValueError):
    """Raised when a case violates a structural or range invariant."""


@dataclass(frozen=True, eq=False)
class UcedCase:
    C: np.ndarray
    UC: np.ndarray
    SC: np.ndarray
    D: np.ndarray
    GSF: np.ndarray
    Fmax: np.ndarray
    Gmin: np.ndarray
    Gmax: np.ndarray
    SR: np.ndarray
    UR: np.ndarray
    SD: np.ndarray
    DR: np.ndarray
    Ton: np.ndarray
    Toff: np.ndarray
    U0: np.ndarray
    G0: np.ndarray
    theta_box: np.ndarray
    name: str = "case"
    description: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.C.shape[0]

    @property
    def T(self) -> int:
        return self.C.shape[1]

    @property
    def K(self) -> int:
        return self.Fmax.shape[0]

    @property
    def n_vars(self) -> int:
        return self.N * (3 * self.T - 1)

    @property
    def n_binaries(self) -> int:
        return self.N * (2 * self.T - 1)


_MATRIX_FIELDS = ("C", "UC", "D", "Gmin", "Gmax")
_VECTOR_FIELDS = ("SR", "UR", "SD", "DR", "U0", "G0")


def make_case(
    *,
    C,
    D,
    GSF,
    Fmax,
    Gmax,
    theta_box,
    UC=None,
    SC=None,
    Gmin=None,
    SR=None,
    UR=None,
    SD=None,
    DR=None,
    Ton=None,
    Toff=None,
    U0=None,
    G0=None,
    name: str = "case",
    description: str = "",
) -> UcedCase:
    """Build a case from array-likes, filling unspecified economics with
    neutral defaults (zero fixed costs, ``Gmin = 0``, ramp limits equal to
    ``Gmax`` and one-period minimum up/down times of zero)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    N, T = C.shape
    D = np.asarray(D, dtype=float).reshape(N, T)
    Gmax = np.broadcast_to(np.asarray(Gmax, dtype=float), (N, T)).copy()
    cap = Gmax.max(axis=1) if T > 0 else np.zeros(N)

    def mat(x, default):
        return np.broadcast_to(
            np.asarray(default if x is None else x, dtype=float), (N, T)
        ).copy()

    def vec(x, default):
        return np.broadcast_to(
            np.asarray(default if x is None else x, dtype=float), (N,)
        ).copy()

    K = int(np.size(Fmax))
    GSF = np.asarray(GSF, dtype=float).reshape(K, N)
    SC_arr = (
        np.zeros((N, T - 1))
        if SC is None
        else np.asarray(SC, dtype=float).reshape(N, T - 1)
    )
    box = np.asarray(theta_box, dtype=float).reshape(K, 2)
    return UcedCase(
        C=C,
        UC=mat(UC, 0.0),
        SC=SC_arr,
        D=D,
        GSF=GSF,
        Fmax=np.asarray(Fmax, dtype=float).reshape(K),
        Gmin=mat(Gmin, 0.0),
        Gmax=Gmax,
        SR=vec(SR, cap),
        UR=vec(UR, cap),
        SD=vec(SD, cap),
        DR=vec(DR, cap),
        Ton=vec(Ton, 0).astype(int),
        Toff=vec(Toff, 0).astype(int),
        U0=vec(U0, 0.0),
        G0=vec(G0, 0.0),
        theta_box=box,
        name=name,
        description=description,
    )


def validate_case(case: UcedCase) -> UcedCase:
    """Check every structural and range invariant and return the case.

    Line capacities are allowed to be negative: the flow-limit rows carry
    ``GSF @ D`` on the right-hand side, so ``Fmax`` acts as an offset and a
    negative value is a legitimate tightening.
    """
    N, T, K = case.C.shape[0], case.C.shape[1], case.Fmax.shape[0]
    if N < 1 or T < 1:
        raise CaseError(f"need N >= 1 and T >= 1, got N={N}, T={T}")
    for name in _MATRIX_FIELDS:
        arr = getattr(case, name)
        if arr.shape != (N, T):
            raise CaseError(f"{name} has shape {arr.shape}, expected ({N}, {T})")
    if case.SC.shape != (N, T - 1):
        raise CaseError(f"SC has shape {case.SC.shape}, expected ({N}, {T - 1})")
    if case.GSF.shape != (K, N):
        raise CaseError(
            f"GSF dimension mismatch: shape {case.GSF.shape}, expected ({K}, {N})"
        )
    for name in _VECTOR_FIELDS + ("Ton", "Toff"):
        arr = getattr(case, name)
        if arr.shape != (N,):
            raise CaseError(f"{name} has shape {arr.shape}, expected ({N},)")
    if case.theta_box.shape != (K, 2):
        raise CaseError(
            f"theta_box has shape {case.theta_box.shape}, expected ({K}, 2)"
        )

    for name in (
        "C", "UC", "SC", "D", "Gmin", "Gmax", "SR", "UR", "SD", "DR", "G0"
    ):
        arr = np.asarray(getattr(case, name))
        if not np.all(np.isfinite(arr)):
            idx = tuple(int(v) for v in np.argwhere(~np.isfinite(arr))[0])
            raise CaseError(f"{name}{list(idx)} is not finite")
        if np.any(arr < 0):
            idx = tuple(int(v) for v in np.argwhere(arr < 0)[0])
            raise CaseError(f"{name}{list(idx)} is negative ({arr[idx]})")
    if not np.all(np.isfinite(case.Fmax)) or not np.all(np.isfinite(case.GSF)):
        raise CaseError("Fmax and GSF must be finite")
    bad = np.argwhere(case.Gmin > case.Gmax)
    if bad.size:
        i, t = (int(v) for v in bad[0])
        raise CaseError(
            f"Gmin[{i}, {t}] = {case.Gmin[i, t]} exceeds Gmax[{i}, {t}] = {case.Gmax[i, t]}"
        )
    for name in ("Ton", "Toff"):
        arr = getattr(case, name)
        for i, v in enumerate(arr):
            if v < 0 or v > T:
                raise CaseError(f"{name}[{i}] = {v} outside range [0, T={T}]")
    for i, u in enumerate(case.U0):
        if u not in (0.0, 1.0):
            raise CaseError(f"U0[{i}] = {u} must be 0 or 1")
    for k, (lo, hi) in enumerate(case.theta_box):
        if lo != 0.0:
            raise CaseError(f"theta_box[{k}] lower bound must be 0, got {lo}")
        if not np.isfinite(hi) or hi < 0:
            raise CaseError(f"theta_box[{k}] upper bound {hi} must be finite and >= 0")
    return case


# --- JSON I/O -----------------------------------------------------------

def _schema() -> dict:
    text = resources.files("mpuced").joinpath("data/case.schema.json").read_text()
    return json.loads(text)


def case_from_dict(data: dict) -> UcedCase:
    """Parse a JSON-like mapping (schema-checked) into a validated case."""
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise CaseError(f"schema violation at {pointer}: {exc.message}") from None
    N, T, K = data["N"], data["T"], data["K"]

    def arr(key, shape, default=None, dtype=float):
        if key not in data:
            if default is None:
                raise CaseError(f"missing field /{key}")
            return np.full(shape, default, dtype=dtype)
        a = np.asarray(data[key], dtype=dtype)
        if a.size == 0 and int(np.prod(shape)) == 0:
            return a.reshape(shape)
        if a.shape != tuple(shape):
            raise CaseError(f"/{key} has shape {a.shape}, expected {tuple(shape)}")
        return a

    Gmax = arr("Gmax", (N, T))
    cap = Gmax.max(axis=1)
    case = UcedCase(
        C=arr("C", (N, T)),
        UC=arr("UC", (N, T), 0.0),
        SC=arr("SC", (N, T - 1), 0.0),
        D=arr("D", (N, T)),
        GSF=arr("GSF", (K, N)),
        Fmax=arr("Fmax", (K,)),
        Gmin=arr("Gmin", (N, T), 0.0),
        Gmax=Gmax,
        SR=np.asarray(data.get("SR", cap), dtype=float),
        UR=np.asarray(data.get("UR", cap), dtype=float),
        SD=np.asarray(data.get("SD", cap), dtype=float),
        DR=np.asarray(data.get("DR", cap), dtype=float),
        Ton=arr("Ton", (N,), 0, int),
        Toff=arr("Toff", (N,), 0, int),
        U0=arr("U0", (N,), 0.0),
        G0=arr("G0", (N,), 0.0),
        theta_box=arr("theta_box", (K, 2)),
        name=data.get("name", "case"),
        description=data.get("description", ""),
    )
    return validate_case(case)


def case_to_dict(case: UcedCase) -> dict:
    out = {
        "name": case.name,
        "description": case.description,
        "N": case.N,
        "K": case.K,
        "T": case.T,
    }
    for key in (
        "C", "UC", "SC", "D", "GSF", "Fmax", "Gmin", "Gmax",
        "SR", "UR", "SD", "DR", "Ton", "Toff", "U0", "G0", "theta_box",
    ):
        out[key] = np.asarray(getattr(case, key)).tolist()
    return out


def load_case(path) -> UcedCase:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseError(f"malformed JSON in {path}: {exc}") from None
    return case_from_dict(data)


def save_case(case: UcedCase, path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1) + "\n")


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package (``case_5_1`` etc.)."""
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("mpuced").joinpath("data", name)))


def load_bundled(name: str) -> UcedCase:
    return load_case(bundled_case_path(name))


def fingerprint(case: UcedCase) -> str:
    canon = json.dumps(case_to_dict(case), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
