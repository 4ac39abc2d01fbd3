"""Classical counterpart: liquid pumped in at the injection site spreads at
constant speed through pipes joining nearest-neighbour occupied sites.

After t steps the wetted region is the breadth-first ball of radius t in
the occupied nearest-neighbour graph.  Every wetted site holds the same
amount of liquid, so IPR = 1/N and the effective width is sqrt(N).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lattice import Lattice, SiteIndex, nearest_neighbor_table

DEFAULT_Z_PER_STEP = 0.5  # mm of propagation per pipe step


@dataclass(frozen=True, eq=False)
class FlowFront:
    covered: frozenset
    steps: int

    @property
    def N(self) -> int:
        return len(self.covered)


def front_distances(lattice: Lattice) -> np.ndarray:
    """Pipe-graph distance from the injection site, -1 where unreachable."""
    spec = lattice.spec
    nn = nearest_neighbor_table(spec.rows, spec.cols)
    occ = lattice.occupied_flat
    dist = np.full(spec.n_sites, -1, dtype=np.int64)
    start = spec.flat(lattice.injection)
    dist[start] = 0
    queue = deque([start])
    while queue:
        s = queue.popleft()
        d = dist[s] + 1
        for t in nn[s]:
            if t >= 0 and occ[t] and dist[t] < 0:
                dist[t] = d
                queue.append(t)
    return dist.reshape(spec.rows, spec.cols)


def flow_front(lattice: Lattice, t: int) -> FlowFront:
    if t < 0:
        raise DomainError(f"step count must be non-negative, got {t}")
    dist = front_distances(lattice)
    cells = np.argwhere((dist >= 0) & (dist <= t))
    return FlowFront(frozenset(SiteIndex(int(r), int(c)) for r, c in cells), int(t))


def classical_ipr(front: FlowFront) -> float:
    if front.N < 1:
        raise DomainError("empty flow front")
    return 1.0 / front.N


def classical_effective_width(front: FlowFront) -> float:
    if front.N < 1:
        raise DomainError("empty flow front")
    return math.sqrt(front.N)


def covered_counts(lattice: Lattice, t_grid) -> np.ndarray:
    """N(t) for every t in ``t_grid`` from a single breadth-first search."""
    t = np.asarray(t_grid, dtype=np.int64)
    d = front_distances(lattice).ravel()
    reached = np.sort(d[d >= 0])
    return np.searchsorted(reached, t, side="right")


def classical_trace(lattice: Lattice, t_grid) -> list[tuple[int, int, float]]:
    """``(t, N, omega_eff)`` per step count."""
    t = np.asarray(t_grid, dtype=np.int64).ravel()
    if t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise DomainError("t grid must be non-empty, non-negative and increasing")
    n = covered_counts(lattice, t)
    return [(int(a), int(b), math.sqrt(b)) for a, b in zip(t, n)]


def _knee_fit(P, y, knee):
    d = np.clip(knee - P, 0.0, None)
    A = np.column_stack([np.ones_like(P), d * d])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(r @ r), coef


def classical_threshold_from_ipr(P_grid, mean_ipr, resolution: float = 0.01) -> dict:
    """Turning point where a quadratic descent meets a flat base.

    Model: ``y = base + a * (knee - P)^2`` below the knee, ``y = base`` above.
    For each candidate knee on a ``resolution`` grid the linear coefficients
    are least-squares fitted; the knee with smallest squared error wins
    (leftmost on ties).
    """
    P = np.asarray(P_grid, dtype=float).ravel()
    y = np.asarray(mean_ipr, dtype=float).ravel()
    if P.size != y.size:
        raise DomainError("P_grid and mean_ipr differ in length")
    if P.size < 5:
        raise DomainError("need at least 5 grid points")
    order = np.argsort(P)
    P, y = P[order], y[order]
    candidates = np.round(np.arange(P[0], P[-1] + resolution / 2, resolution), 10)
    best = None
    for k in candidates:
        if np.count_nonzero(P < k) < 3:
            continue
        sse, coef = _knee_fit(P, y, k)
        if best is None or sse < best[0] - 1e-15:
            best = (sse, k, coef)
    if best is None:
        raise DomainError("no descending branch: fewer than 3 grid points below any knee")
    sse, k, (base, a) = best
    if not a > 0 or k >= P[-1]:
        raise DomainError("no descending branch followed by a flat base in the data")
    return {"knee": float(k), "base": float(base), "curvature": float(a), "sse": sse}
