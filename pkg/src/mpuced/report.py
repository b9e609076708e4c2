"""JSON reports and plot data.

Regions are written in full ``K`` coordinates (pinned lines appear as
``lo <= theta_k <= hi`` rows).  Floats are written with Python's shortest
round-trip repr, so parsing and re-serializing is exact.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import polytope as pt
from .bnb import Incumbent, IncumbentPiece, MilpResult
from .case import UcedCase, fingerprint
from .mplp import ParamSpace
from .polytope import Polytope
from .standard_form import StandardForm

FORMAT = "mpuced-report/1"
PLOT_POINTS = 200


def _clean(x):
    """JSON-safe copy: numpy to python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x + 0.0 if math.isfinite(x) else None
    return x


def _region(space: ParamSpace, P: Polytope) -> dict:
    full = space.lift(P)
    return {"E": full.E.tolist(), "f": full.f.tolist()}


def _witness(form: StandardForm, witness: dict) -> dict:
    if form.u_idx is None:
        return {"columns": sorted(witness), "values": [witness[j] for j in sorted(witness)]}
    U = [[witness.get(int(j)) for j in row] for row in form.u_idx]
    V = [[witness.get(int(j)) for j in row] for row in form.v_idx]
    return {"U": U, "V": V}


def build_report(
    case: UcedCase,
    form: StandardForm,
    result: MilpResult,
    params: dict,
    rankings=None,
    plan=None,
    timestamp: bool = True,
) -> dict:
    space = result.incumbent.space
    cert = result.certificate
    lower = []
    uncovered = []
    if result.root_lower is not None:
        for P, w, poly in result.root_lower.value_pieces():
            lower.append({"region": _region(space, poly), "P": P, "w": w})
        uncovered = [_region(space, U) for U in result.root_lower.uncovered]
    pieces = []
    for k, p in enumerate(result.incumbent.pieces):
        pieces.append({
            "region": _region(space, p.region),
            "P": p.P,
            "w": p.w,
            "gradient": p.P,
            "witness": _witness(form, p.witness),
            "delta_root": cert.deltas_root[k] if k < len(cert.deltas_root) else None,
            "delta_live": cert.deltas_live[k] if k < len(cert.deltas_live) else None,
            "flagged": cert.flagged[k] if k < len(cert.flagged) else False,
        })
    status = "infeasible" if cert.infeasible else "optimal"
    if status == "infeasible":
        uncovered = [_region(space, space.polytope())]
    out = {
        "format": FORMAT,
        "case": {
            "name": case.name,
            "fingerprint": fingerprint(case),
            "K": space.K,
            "theta_box": space.box.tolist(),
        },
        "params": dict(params),
        "status": status,
        "lower": lower,
        "pieces": pieces,
        "uncovered": uncovered,
        "certificate": {
            "alpha": cert.alpha,
            "xi": cert.xi,
            "Q": cert.Q,
            "seed": cert.seed,
            "branch_order": cert.branch_order,
            "node_count": cert.node_count,
            "termination": cert.termination,
            "max_delta": cert.max_delta,
            "lower_bound": "root relaxation (delta_root); open-node minimum (delta_live)",
        },
        "value_function": "incumbent (integer-feasible upper bound)",
        "rankings": None if rankings is None else [{"line": k, "rate": r} for k, r in rankings],
        "plan": None if plan is None else plan_dict(plan),
    }
    if timestamp:
        out["timings"] = {"solve_s": cert.elapsed}
        out["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return _clean(out)


def plan_dict(plan) -> dict:
    return _clean({
        "theta_star": plan.theta_star,
        "spend": plan.spend,
        "objective": plan.objective,
        "binding": plan.binding,
        "piece": plan.piece,
        "rates": plan.rates,
        "recommended": plan.recommended,
    })


def dumps(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=False, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps(report))


# --- reading back ---------------------------------------------------------

@dataclass
class ReportView:
    space: ParamSpace
    upper: Incumbent
    lower: Incumbent | None
    data: dict


def _reduced(space: ParamSpace, region: dict) -> Polytope:
    E = np.asarray(region["E"], dtype=float).reshape(-1, space.K)
    f = np.asarray(region["f"], dtype=float)
    pinned = np.setdiff1d(np.arange(space.K), space.free)
    f = f - E[:, pinned] @ space.box[pinned, 0]
    P = Polytope(E[:, space.free], f)
    return pt.reduce(P) or P


def load_report(path) -> ReportView:
    data = json.loads(Path(path).read_text())
    if data.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} report")
    box = np.asarray(data["case"]["theta_box"], dtype=float).reshape(-1, 2)
    free = np.flatnonzero(box[:, 1] > box[:, 0])
    space = ParamSpace(box=box, free=free)

    def inc(items, with_witness):
        out = Incumbent(space)
        for it in items:
            P = np.asarray(it["P"], dtype=float)
            out.pieces.append(IncumbentPiece(_reduced(space, it["region"]), P, float(it["w"]), it.get("witness") if with_witness else {}))
        return out

    upper = inc(data.get("pieces", []), True)
    lower = inc(data["lower"], False) if data.get("lower") else None
    return ReportView(space, upper, lower, data)


# --- plot data ----------------------------------------------------------------

def _axis_breaks(pieces, space: ParamSpace, k: int, base, lo, hi) -> list:
    """Ends of each piece's interval along ``theta = base + s e_k``."""
    j = int(np.flatnonzero(space.free == k)[0])
    y0 = space.to_reduced(base)
    out = []
    for p in pieces:
        e = p.region.E[:, j]
        g = p.region.f - p.region.E @ y0
        smin, smax = lo, hi
        for ei, gi in zip(e, g):
            if ei > 1e-14:
                smax = min(smax, gi / ei)
            elif ei < -1e-14:
                smin = max(smin, gi / ei)
            elif gi < -1e-9:
                smin, smax = 1.0, 0.0
        if smin <= smax + 1e-12:
            out.extend([smin, smax])
    return out


def plot_rows(view: ReportView, k: int, points: int = PLOT_POINTS) -> list:
    """``(theta_k, lower, upper, kind)`` rows along line ``k``; others at their lower bound."""
    space = view.space
    lo, hi = space.box[k]
    base = space.box[:, 0].copy()
    funcs = [view.upper] + ([view.lower] if view.lower is not None else [])
    breaks = set()
    for fn in funcs:
        for s in _axis_breaks(fn.pieces, space, k, base, lo, hi):
            if lo + 1e-12 < s < hi - 1e-12:
                breaks.add(round(s, 12))
    slopes = [p.P[k] for fn in funcs for p in fn.pieces]
    if not breaks and all(abs(s) < 1e-12 for s in slopes):
        grid = [(lo, "end"), (hi, "end")]
    else:
        grid = [(float(s), "sample") for s in np.linspace(lo, hi, points)]
        grid += [(b, "breakpoint") for b in sorted(breaks)]
        grid.sort(key=lambda t: (t[0], t[1] != "breakpoint"))
        dedup = []
        for s, kind in grid:
            if dedup and abs(dedup[-1][0] - s) <= 1e-12:
                continue
            dedup.append((s, kind))
        grid = dedup
    rows = []
    for s, kind in grid:
        theta = base.copy()
        theta[k] = s
        up = view.upper.value(theta)
        low = view.lower.value(theta) if view.lower is not None else None
        rows.append((s, low, up, kind))
    return rows


def emit_plot(report_path, out_dir=None) -> list:
    """Write ``<stem>_line<k>.csv`` per varying line; returns the paths."""
    view = load_report(report_path)
    if view.lower is None:
        warnings.warn("report has no lower bound; writing upper bound only", stacklevel=2)
    report_path = Path(report_path)
    out_dir = Path(out_dir) if out_dir is not None else report_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in view.space.free:
        path = out_dir / f"{report_path.stem}_line{int(k)}.csv"
        lines = ["theta,lower,upper,kind" if view.lower is not None else "theta,upper,kind"]
        for s, low, up, kind in plot_rows(view, int(k)):
            up_s = repr(float(up)) if np.isfinite(up) else ""
            if view.lower is not None:
                low_s = repr(float(low)) if low is not None and np.isfinite(low) else ""
                lines.append(f"{float(s)!r},{low_s},{up_s},{kind}")
            else:
                lines.append(f"{float(s)!r},{up_s},{kind}")
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths
