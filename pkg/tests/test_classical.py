import math

import numpy as np
import pytest

from qperc.classical import (
    classical_effective_width, classical_ipr, classical_threshold_from_ipr,
    classical_trace, covered_counts, flow_front, front_distances,
)
from qperc.errors import DomainError
from qperc.lattice import LatticeSpec, coordinates_array, generate_lattice, lattice_from_mask


def ball_by_rounds(lattice, t):
    """Grow the wetted set one round at a time using geometric adjacency."""
    spec = lattice.spec
    xy = coordinates_array(spec).reshape(-1, 2)
    occ = lattice.occupied_flat
    wet = {spec.flat(lattice.injection)}
    for _ in range(t):
        new = set(wet)
        for s in wet:
            d = np.hypot(*(xy - xy[s]).T)
            new.update(int(k) for k in np.flatnonzero((np.abs(d - spec.pitch) < 1e-9) & occ))
        wet = new
    return wet


@pytest.mark.parametrize("seed", range(5))
def test_front_matches_round_growth(seed):
    lat = generate_lattice(LatticeSpec(9, 10), 0.7, seed)
    for t in (0, 1, 3, 8):
        got = {lat.spec.flat(s) for s in flow_front(lat, t).covered}
        assert got == ball_by_rounds(lat, t)


def test_counts_from_single_search():
    lat = generate_lattice(LatticeSpec(20, 20), 0.75, 3)
    t = np.arange(0, 40)
    n = covered_counts(lat, t)
    assert n.tolist() == [flow_front(lat, int(k)).N for k in t]
    assert np.all(np.diff(n) >= 0) and n[0] == 1


def test_ipr_and_width_identities():
    lat = generate_lattice(LatticeSpec(12, 12), 0.8, 1)
    for t in (0, 2, 5, 30):
        f = flow_front(lat, t)
        assert classical_ipr(f) == 1.0 / f.N
        assert classical_effective_width(f) == math.sqrt(f.N)
    tr = classical_trace(lat, [0, 2, 5])
    assert [row[2] for row in tr] == [math.sqrt(row[1]) for row in tr]


def test_trapped_source():
    mask = np.zeros((5, 5), bool)
    inj = (2, 2)
    mask[inj] = True
    mask[0, :] = True
    lat = lattice_from_mask(LatticeSpec(5, 5), mask, injection=inj)
    assert flow_front(lat, 100).N == 1
    assert (front_distances(lat) >= 0).sum() == 1


def test_full_lattice_ring_sizes():
    lat = generate_lattice(LatticeSpec(30, 30), 1.0, 0)
    n = covered_counts(lat, [0, 1, 2])
    assert n.tolist() == [1, 4, 10]  # 3 neighbours, then 6 more at distance 2


def test_domain_errors():
    lat = generate_lattice(LatticeSpec(5, 5), 1.0, 0)
    with pytest.raises(DomainError):
        flow_front(lat, -1)
    with pytest.raises(DomainError):
        classical_trace(lat, [3, 2])


def planted(knee, base=0.002, a=0.4, step=0.05):
    P = np.round(np.arange(0.1, 1.0001, step), 10)
    return P, base + a * np.clip(knee - P, 0, None) ** 2


def test_planted_knee_recovered():
    P, y = planted(0.63, step=0.01)
    fit = classical_threshold_from_ipr(P, y)
    assert fit["knee"] == pytest.approx(0.63, abs=1e-9)
    assert fit["base"] == pytest.approx(0.002) and fit["curvature"] == pytest.approx(0.4)


def test_planted_knee_with_noise():
    rng = np.random.default_rng(0)
    P, y = planted(0.63)
    fit = classical_threshold_from_ipr(P, y * (1 + 0.02 * rng.normal(size=y.size)))
    assert abs(fit["knee"] - 0.63) <= 0.02


def test_knee_rejects_flat_or_short_data():
    with pytest.raises(DomainError):
        classical_threshold_from_ipr([0.1, 0.2, 0.3], [1, 1, 1])
    P = np.linspace(0.1, 1.0, 10)
    with pytest.raises(DomainError):
        classical_threshold_from_ipr(P, 1.0 + P)  # rising: no descending branch


@pytest.mark.parametrize("seed", range(20))
def test_front_nests_and_fills_cluster(seed):
    from qperc.clusters import label_clusters
    lat = generate_lattice(LatticeSpec(8, 8), 0.65, seed)
    prev = set()
    for t in range(0, 70):
        cur = set(flow_front(lat, t).covered)
        assert prev <= cur
        prev = cur
    lab = label_clusters(lat)
    cluster = {tuple(s) for s in lab.members(lab.label[lat.injection]).tolist()}
    assert {tuple(s) for s in prev} == cluster


def test_no_tunneling_in_front():
    from qperc.lattice import neighbors
    lat = generate_lattice(LatticeSpec(15, 15), 0.7, 9)
    f = flow_front(lat, 12)
    for s in f.covered:
        if s != lat.injection:
            assert any(n in f.covered for n in neighbors(lat, s))


def _late_fits(P_grid, trials):
    from qperc.ensemble import ExperimentConfig, run_classical_sweep
    from qperc.observables import fit_exponent
    cfg = ExperimentConfig(spec=LatticeSpec(100, 100), bound_side=40, P_grid=P_grid, trials_per_P=trials)
    cs = run_classical_sweep(cfg)
    z = cs.t_grid * cfg.z_per_step
    return [fit_exponent(z, w) for w in cs.widths("count")]


def test_full_lattice_ballistic_slope():
    from qperc.observables import fit_exponent
    lat = generate_lattice(LatticeSpec(100, 100), 1.0, 0)
    tr = classical_trace(lat, np.arange(1, 41))
    fit = fit_exponent([0.5 * t for t, _, _ in tr], [w for _, _, w in tr])
    assert 0.9 <= fit.nu <= 1.0


def test_dilution_lowers_intercept_at_least_by_area_factor():
    # N = P * M gives the gap 0.5 * log(1 / P); tortuous paths only widen it
    low, full = _late_fits((0.81, 1.0), 100)
    assert full.intercept - low.intercept >= 0.5 * math.log(1 / 0.81)
