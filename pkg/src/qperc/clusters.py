"""Cluster labeling and spanning on the nearest-neighbour graph.

Union-find with path halving and union by size does the labeling.  For
ensembles the same structure runs in Newman-Ziff order: sites are added in
increasing order of their occupation uniform, so one pass per seed yields
the exact occupation probability above which the lattice spans.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, ResourceError
from .lattice import NEAREST, Lattice, LatticeSpec, injection_site, nearest_neighbor_table, pair_table
from .rng import site_uniforms

# boundary bits carried by each cluster root
TOP, BOTTOM, LEFT, RIGHT = 1, 2, 4, 8

SPANNING_MODES = {
    "corner": TOP | BOTTOM | LEFT | RIGHT,  # top-left to bottom-right: both axes
    "vertical": TOP | BOTTOM,
    "horizontal": LEFT | RIGHT,
}
MODES = ("corner", "vertical", "horizontal", "either")


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


@njit(cache=True)
def _label(n, occ, pi, pj):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for e in range(pi.size):
        a = pi[e]
        b = pj[e]
        if occ[a] and occ[b]:
            _union(parent, size, a, b)
    roots = np.empty(n, dtype=np.int64)
    for k in range(n):
        roots[k] = _find(parent, k) if occ[k] else -1
    return roots


@njit(cache=True)
def _span_onsets(order, u, nn, edge_bits, targets):
    """Uniform value at which each target boundary mask is first joined."""
    n = order.size
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    bits = edge_bits.copy()
    occ = np.zeros(n, dtype=np.bool_)
    nt = targets.size
    onset = np.full(nt, np.inf)
    found = 0
    either = -1.0
    for step in range(n):
        s = order[step]
        occ[s] = True
        for q in range(nn.shape[1]):
            t = nn[s, q]
            if t >= 0 and occ[t]:
                ra = _find(parent, s)
                rb = _find(parent, t)
                if ra != rb:
                    m = bits[ra] | bits[rb]
                    r = _union(parent, size, ra, rb)
                    bits[r] = m
        m = bits[_find(parent, s)]
        for k in range(nt):
            if onset[k] == np.inf and (m & targets[k]) == targets[k]:
                onset[k] = u[s]
                found += 1
        if found == nt:
            break
    return onset


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """``label`` is (rows, cols) with -1 on vacant sites; ids are 0.. in order of
    each cluster's first row-major site."""

    label: np.ndarray
    cluster_sizes: dict

    def largest(self) -> int:
        return max(self.cluster_sizes, key=lambda k: (self.cluster_sizes[k], -k))

    def members(self, cluster_id: int) -> np.ndarray:
        return np.argwhere(self.label == cluster_id)


def label_clusters(lattice: Lattice) -> ClusterLabeling:
    spec = lattice.spec
    i, j = pair_table(spec.rows, spec.cols, NEAREST)
    roots = _label(spec.n_sites, lattice.occupied_flat, i, j)
    label = np.full(spec.n_sites, -1, dtype=np.int64)
    occupied = roots >= 0
    _, first, inverse = np.unique(roots[occupied], return_index=True, return_inverse=True)
    # renumber so ids follow the first row-major site of each cluster
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    label[occupied] = rank[inverse]
    sizes = np.bincount(label[occupied], minlength=first.size)
    label = label.reshape(spec.rows, spec.cols)
    label.flags.writeable = False
    return ClusterLabeling(label, {int(k): int(v) for k, v in enumerate(sizes)})


def boundary_bits(spec: LatticeSpec) -> np.ndarray:
    b = np.zeros((spec.rows, spec.cols), dtype=np.int64)
    b[0, :] |= TOP
    b[-1, :] |= BOTTOM
    b[:, 0] |= LEFT
    b[:, -1] |= RIGHT
    return b.ravel()


def _mode_ok(mask: int, mode: str) -> bool:
    if mode == "either":
        return (mask & SPANNING_MODES["vertical"]) == SPANNING_MODES["vertical"] or \
            (mask & SPANNING_MODES["horizontal"]) == SPANNING_MODES["horizontal"]
    try:
        target = SPANNING_MODES[mode]
    except KeyError:
        raise DomainError(f"unknown spanning mode {mode!r}") from None
    return (mask & target) == target


def spanning_check(labeling: ClusterLabeling, lattice: Lattice, mode: str = "corner") -> bool:
    """Whether some cluster crosses the lattice.

    ``corner`` needs a cluster touching the first and last row and the first
    and last column; ``vertical``/``horizontal`` need one axis; ``either``
    accepts any single axis.
    """
    lab = labeling.label.ravel()
    bits = boundary_bits(lattice.spec)
    occ = lab >= 0
    if not occ.any():
        return False
    masks = np.zeros(max(labeling.cluster_sizes) + 1, dtype=np.int64)
    np.bitwise_or.at(masks, lab[occ], bits[occ])
    return any(_mode_ok(int(m), mode) for m in masks)


def spanning_onsets(spec: LatticeSpec, seed: int) -> dict:
    """Occupation probability above which the lattice of ``seed`` spans.

    Returns ``{mode: u_c}``: ``generate_lattice(spec, P, seed)`` spans in that
    mode iff ``P > u_c`` (``inf`` if it never does).
    """
    u = site_uniforms(seed, spec.n_sites).copy()
    u[spec.flat(injection_site(spec))] = -1.0  # forced occupied
    order = np.argsort(u, kind="stable")
    targets = np.array([SPANNING_MODES[m] for m in ("corner", "vertical", "horizontal")],
                       dtype=np.int64)
    onset = _span_onsets(order, u, nearest_neighbor_table(spec.rows, spec.cols),
                         boundary_bits(spec), targets)
    out = {"corner": float(onset[0]), "vertical": float(onset[1]), "horizontal": float(onset[2])}
    out["either"] = min(out["vertical"], out["horizontal"])
    return out


EXACT_LIMIT = 22


def spanning_counts(spec: LatticeSpec, mode: str = "corner") -> np.ndarray:
    """``counts[k]``: spanning configurations with ``k`` occupied free sites.

    Every occupation of the sites other than the (always occupied) injection
    site is enumerated, so this is only feasible for tiny lattices.
    """
    n = spec.n_sites
    if n > EXACT_LIMIT:
        raise ResourceError(f"exhaustive enumeration limited to {EXACT_LIMIT} sites, got {n}")
    if mode not in MODES:
        raise DomainError(f"unknown spanning mode {mode!r}")
    inj = spec.flat(injection_site(spec))
    free = np.array([k for k in range(n) if k != inj])
    i, j = pair_table(spec.rows, spec.cols, NEAREST)
    bits = boundary_bits(spec)
    counts = np.zeros(n, dtype=np.int64)
    occ = np.zeros(n, dtype=np.bool_)
    for code in range(1 << free.size):
        occ[:] = False
        occ[inj] = True
        sel = (code >> np.arange(free.size)) & 1
        occ[free[sel.astype(bool)]] = True
        roots = _label(n, occ, i, j)
        masks = np.zeros(n, dtype=np.int64)
        np.bitwise_or.at(masks, roots[occ], bits[occ])
        if any(_mode_ok(int(m), mode) for m in np.unique(masks[masks > 0])):
            counts[int(sel.sum())] += 1
    return counts


def exact_spanning_probability(spec: LatticeSpec, P: float, mode: str = "corner") -> float:
    """Probability that ``generate_lattice(spec, P, seed)`` spans, over seeds."""
    if not 0.0 <= P <= 1.0:
        raise DomainError(f"occupation probability must lie in [0, 1], got {P}")
    counts = spanning_counts(spec, mode)
    m = spec.n_sites - 1
    k = np.arange(counts.size)
    return float(np.sum(counts * P ** k * (1.0 - P) ** (m - k)))
