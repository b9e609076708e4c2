"""Deterministic synthetic 5-bus, 24-period planning case.

Topology and reactances follow the widely used PJM 5-bus test network;
generator data, loads and the daily profile are invented for testing and
do not reproduce any published study.
"""
from __future__ import annotations

import numpy as np

from .case import UcedCase, make_case

BUSES = ("A", "B", "C", "D", "E")
LINES = (("A", "B", 0.0281), ("A", "D", 0.0304), ("A", "E", 0.0064),
         ("B", "C", 0.0108), ("C", "D", 0.0297), ("D", "E", 0.0297))
SLACK = "D"

PROFILE = np.array([
    0.62, 0.58, 0.56, 0.55, 0.56, 0.60, 0.68, 0.77, 0.85, 0.90, 0.93, 0.95,
    0.96, 0.97, 0.98, 0.99, 1.00, 0.99, 0.96, 0.92, 0.86, 0.79, 0.72, 0.66,
])


def shift_factors(lines=LINES, buses=BUSES, slack=SLACK) -> np.ndarray:
    """DC shift factors ``K x N`` (flow on line k per MW injected at bus i,
    withdrawn at the slack)."""
    idx = {b: i for i, b in enumerate(buses)}
    N, K = len(buses), len(lines)
    Bf = np.zeros((K, N))
    Cft = np.zeros((K, N))
    for k, (f, t, x) in enumerate(lines):
        Cft[k, idx[f]], Cft[k, idx[t]] = 1.0, -1.0
        Bf[k] = Cft[k] / x
    Bbus = Cft.T @ Bf
    keep = [i for i in range(N) if buses[i] != slack]
    S = np.zeros((K, N))
    S[:, keep] = Bf[:, keep] @ np.linalg.inv(Bbus[np.ix_(keep, keep)])
    return S


def synth_5bus_24(varying_line: int = 5, upgrade: float = 100.0) -> UcedCase:
    T = PROFILE.size
    GSF = shift_factors()
    Gmax = np.array([210.0, 60.0, 520.0, 200.0, 600.0])
    Gmin = np.array([40.0, 10.0, 80.0, 40.0, 60.0])
    C = np.array([14.0, 35.0, 30.0, 40.0, 10.0])
    UC = np.array([120.0, 40.0, 300.0, 150.0, 400.0])
    SC = np.array([400.0, 100.0, 1500.0, 600.0, 2500.0])
    peak = np.array([0.0, 300.0, 300.0, 400.0, 0.0])
    D = np.round(np.outer(peak, PROFILE), 1)
    # fixed, slightly modulated costs through the day
    tilt = 1.0 + 0.05 * np.sin(np.linspace(0, 2 * np.pi, T, endpoint=False))
    Cmat = np.round(np.outer(C, tilt), 3)
    Fmax_abs = np.array([400.0, 999.0, 999.0, 999.0, 999.0, 240.0])
    # orient each row along the flow of an unconstrained merit-order dispatch at peak
    G_peak = _merit(D[:, int(np.argmax(PROFILE))], Gmax, Gmin, C)
    flow = GSF @ (G_peak - D[:, int(np.argmax(PROFILE))])
    sign = np.where(flow >= 0, 1.0, -1.0)
    GSF = GSF * sign[:, None]
    K = GSF.shape[0]
    box = np.zeros((K, 2))
    box[varying_line, 1] = upgrade
    return make_case(
        C=Cmat,
        UC=np.outer(UC, np.ones(T)),
        SC=np.outer(SC, np.ones(T - 1)),
        D=D,
        GSF=np.round(GSF, 6),
        Fmax=Fmax_abs,
        Gmax=np.outer(Gmax, np.ones(T)),
        Gmin=np.outer(Gmin, np.ones(T)),
        SR=Gmax * 0.6,
        UR=Gmax * 0.5,
        SD=Gmax * 0.6,
        DR=Gmax * 0.5,
        Ton=np.array([2, 1, 4, 2, 4]),
        Toff=np.array([2, 1, 3, 2, 3]),
        U0=np.array([1.0, 0.0, 1.0, 1.0, 1.0]),
        G0=np.array([150.0, 0.0, 120.0, 100.0, 250.0]),
        theta_box=box,
        name="case_synth_5bus_24",
        description=(
            "SYNTHETIC test case: PJM-style 5-bus topology, invented generator data "
            "and load profile, 24 periods, only line D-E varies (0 to 100 MW). "
            "Not the data of any published study."
        ),
    )


def _merit(d, Gmax, Gmin, C):
    total = d.sum()
    G = Gmin.copy()
    rest = total - G.sum()
    for i in np.argsort(C, kind="stable"):
        take = min(Gmax[i] - G[i], rest)
        G[i] += take
        rest -= take
    return G
