"""Seeded random UCED cases small enough for brute-force enumeration."""
from __future__ import annotations

import numpy as np

from .case import UcedCase, make_case

SHAPES = [(N, T) for N in (1, 2, 3) for T in (1, 2, 3) if N * (2 * T - 1) <= 12]


def random_case(seed: int, max_binaries: int = 12) -> UcedCase:
    rng = np.random.default_rng(seed)
    shapes = [s for s in SHAPES if s[0] * (2 * s[1] - 1) <= max_binaries]
    N, T = shapes[rng.integers(len(shapes))]
    K = int(rng.integers(1, 3))
    C = rng.integers(1, 10, size=(N, T)).astype(float)
    UC = rng.integers(0, 20, size=(N, T)).astype(float)
    SC = rng.integers(0, 25, size=(N, T - 1)).astype(float)
    D = rng.integers(2, 12, size=(N, T)).astype(float)
    total = D.sum(axis=0).max()
    Gmax = np.round(rng.uniform(0.5, 1.2, size=(N, 1)) * total, 0) + np.zeros((N, T))
    Gmin = np.where(rng.random((N, T)) < 0.4, np.round(0.2 * Gmax, 0), 0.0)
    cap = Gmax.max(axis=1)
    SR = np.round(cap * rng.uniform(0.7, 1.0, N), 0)
    UR = np.round(cap * rng.uniform(0.5, 1.0, N), 0)
    SD = np.round(cap * rng.uniform(0.5, 1.0, N), 0)
    DR = np.round(cap * rng.uniform(0.3, 1.0, N), 0)
    Ton = rng.integers(0, T + 1, size=N)
    Toff = rng.integers(0, T + 1, size=N)
    GSF = np.round(rng.uniform(-1, 1, size=(K, N)), 1)
    Fmax = np.round(rng.uniform(-2, 4, size=K), 1)
    hi = np.where(rng.random(K) < 0.2, 0.0, rng.choice([5.0, 10.0], size=K))
    box = np.column_stack([np.zeros(K), hi])
    return make_case(
        C=C, UC=UC, SC=SC, D=D, GSF=GSF, Fmax=Fmax, Gmax=Gmax, Gmin=Gmin,
        SR=SR, UR=UR, SD=SD, DR=DR, Ton=Ton, Toff=Toff, theta_box=box,
        name=f"random_{seed}",
        description="seeded random instance",
    )
