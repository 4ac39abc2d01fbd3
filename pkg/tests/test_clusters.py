from collections import deque
from itertools import product

import numpy as np
import pytest

from qperc.clusters import (
    exact_spanning_probability, label_clusters, spanning_check, spanning_counts,
    spanning_onsets,
)
from qperc.errors import DomainError, ResourceError
from qperc.lattice import LatticeSpec, coordinates_array, generate_lattice, injection_site, lattice_from_mask


def geometric_adjacency(spec):
    """Neighbour lists from Euclidean distance alone."""
    xy = coordinates_array(spec).reshape(-1, 2)
    d = np.sqrt(((xy[:, None] - xy[None]) ** 2).sum(-1))
    close = np.abs(d - spec.pitch) < 1e-9
    return [np.flatnonzero(row).tolist() for row in close]


def flood_components(occ, adj):
    comp = [-1] * len(occ)
    n = 0
    for s in range(len(occ)):
        if occ[s] and comp[s] < 0:
            comp[s] = n
            q = deque([s])
            while q:
                v = q.popleft()
                for w in adj[v]:
                    if occ[w] and comp[w] < 0:
                        comp[w] = n
                        q.append(w)
            n += 1
    return comp


def flood_spans(occ, adj, rows, cols, mode):
    comp = flood_components(occ, adj)
    touch = {}
    for s, c in enumerate(comp):
        if c < 0:
            continue
        r, k = divmod(s, cols)
        t = touch.setdefault(c, set())
        if r == 0:
            t.add("T")
        if r == rows - 1:
            t.add("B")
        if k == 0:
            t.add("L")
        if k == cols - 1:
            t.add("R")
    need = {"corner": [{"T", "B", "L", "R"}], "vertical": [{"T", "B"}],
            "horizontal": [{"L", "R"}], "either": [{"T", "B"}, {"L", "R"}]}[mode]
    return any(n <= t for t in touch.values() for n in need)


def same_partition(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if not np.array_equal(a < 0, b < 0):
        return False
    pairs = set(zip(a[a >= 0].tolist(), b[b >= 0].tolist()))
    return len(pairs) == len(set(a[a >= 0].tolist())) == len(set(b[b >= 0].tolist()))


def test_union_find_matches_flood_fill_on_random_8x8():
    spec = LatticeSpec(8, 8)
    adj = geometric_adjacency(spec)
    rng = np.random.default_rng(7)
    for trial in range(1000):
        P = rng.uniform(0.3, 0.9)
        lat = generate_lattice(spec, P, int(rng.integers(2**63)))
        lab = label_clusters(lat)
        ref = flood_components(lat.occupied_flat.tolist(), adj)
        assert same_partition(lab.label, ref), trial
        for mode in ("corner", "vertical", "horizontal", "either"):
            assert spanning_check(lab, lat, mode) == flood_spans(
                lat.occupied_flat.tolist(), adj, 8, 8, mode)


def test_labels_ordered_and_sizes():
    mask = np.array([[1, 1, 0, 0],
                     [0, 0, 0, 1],
                     [1, 0, 0, 1]], bool)
    lat = lattice_from_mask(LatticeSpec(3, 4), mask, injection=(0, 0))
    lab = label_clusters(lat)
    assert lab.label.tolist() == [[0, 0, -1, -1], [-1, -1, -1, 1], [2, -1, -1, 1]]
    assert lab.cluster_sizes == {0: 2, 1: 2, 2: 1}
    assert lab.largest() == 0
    assert lab.members(1).tolist() == [[1, 3], [2, 3]]


def test_full_lattice_spans_every_mode():
    lat = generate_lattice(LatticeSpec(6, 6), 1.0, 0)
    lab = label_clusters(lat)
    assert len(lab.cluster_sizes) == 1
    for mode in ("corner", "vertical", "horizontal", "either"):
        assert spanning_check(lab, lat, mode)
    with pytest.raises(DomainError):
        spanning_check(lab, lat, "diagonal")


def enumeration_oracle(rows, cols, P, mode):
    spec = LatticeSpec(rows, cols)
    adj = geometric_adjacency(spec)
    inj = spec.flat(injection_site(spec))
    total = 0.0
    for bits in product((0, 1), repeat=rows * cols):
        weight = 1.0
        for s, b in enumerate(bits):
            if s != inj:
                weight *= P if b else 1.0 - P
        if not bits[inj]:
            continue  # the generator always occupies the injection site
        if flood_spans(list(bits), adj, rows, cols, mode):
            total += weight
    return total


@pytest.mark.parametrize("P", [0.5, 0.3, 0.7, 0.9])
@pytest.mark.parametrize("mode", ["corner", "vertical", "horizontal"])
def test_exact_spanning_probability_3x4(P, mode):
    got = exact_spanning_probability(LatticeSpec(3, 4), P, mode)
    assert abs(got - enumeration_oracle(3, 4, P, mode)) <= 1e-12


def test_spanning_counts_guards():
    with pytest.raises(ResourceError):
        spanning_counts(LatticeSpec(5, 5))
    with pytest.raises(DomainError):
        exact_spanning_probability(LatticeSpec(3, 4), 1.2)


def test_onsets_agree_with_direct_spanning():
    spec = LatticeSpec(12, 12)
    grid = np.linspace(0.0, 1.0, 41)
    for seed in range(60):
        onset = spanning_onsets(spec, seed)
        for P in grid:
            lat = generate_lattice(spec, float(P), seed)
            lab = label_clusters(lat)
            for mode in ("corner", "vertical", "horizontal", "either"):
                assert spanning_check(lab, lat, mode) == (P > onset[mode]), (seed, P, mode)


def test_onsets_monte_carlo_matches_exact():
    spec = LatticeSpec(3, 4)
    onsets = np.array([spanning_onsets(spec, s)["corner"] for s in range(20000)])
    for P in (0.5, 0.7):
        mc = np.mean(onsets < P)
        exact = exact_spanning_probability(spec, P)
        assert abs(mc - exact) < 4 * np.sqrt(exact * (1 - exact) / onsets.size)
