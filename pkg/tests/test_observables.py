import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qperc.errors import DomainError
from qperc.lattice import LatticeSpec, generate_lattice
from qperc.observables import (
    IprSample, bound_fraction, bound_mask, effective_width, fit_exponent, ipr,
    ipr_statistics, percolation_event, width_from_mean_ipr,
)


def test_ipr_identities():
    d = np.zeros(50)
    d[7] = 3.0
    assert ipr(d) == 1.0
    for n in (1, 2, 17, 1600):
        assert ipr(np.full(n, 0.25)) == pytest.approx(1.0 / n, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=200).filter(lambda v: sum(v) > 1e-9))
def test_ipr_range_and_scale_invariance(v):
    x = np.array(v)
    val = ipr(x)
    assert 1.0 / np.count_nonzero(x) - 1e-12 <= val <= 1.0 + 1e-12
    assert ipr(7.5 * x) == pytest.approx(val, rel=1e-12)


@pytest.mark.parametrize("bad", [[], [0.0, 0.0], [1.0, -0.1], [np.nan, 1.0]])
def test_ipr_rejects(bad):
    with pytest.raises(DomainError):
        ipr(bad)


def test_effective_width():
    s = [IprSample(v, 0.8, 20.0, k) for k, v in enumerate((0.01, 0.03, 0.02))]
    assert effective_width(s) == pytest.approx(0.02 ** -0.5)
    with pytest.raises(DomainError):
        effective_width([])
    with pytest.raises(DomainError):
        effective_width(s + [IprSample(0.1, 0.9, 20.0)])
    np.testing.assert_allclose(width_from_mean_ipr(np.array([0.25, 0.01])), [2.0, 10.0])


def test_ipr_statistics():
    st_ = ipr_statistics([0.1, 0.2, 0.3])
    assert st_["mean"] == pytest.approx(0.2)
    assert st_["std"] == pytest.approx(0.1)
    assert st_["ratio"] == pytest.approx(0.5)
    with pytest.raises(DomainError):
        ipr_statistics([0.1])


def test_bound_mask_geometry():
    lat = generate_lattice(LatticeSpec(40, 40), 1.0, 0)
    out = bound_mask(lat, 16)
    assert (~out).sum() == 256
    rows, cols = np.nonzero(~out)
    assert rows.max() - rows.min() == 15 and cols.max() - cols.min() == 15
    r0, c0 = lat.injection
    assert rows.min() <= r0 <= rows.max() and cols.min() <= c0 <= cols.max()
    with pytest.raises(DomainError):
        bound_mask(lat, 41)
    with pytest.raises(DomainError):
        bound_mask(lat, 0)


def test_bound_fraction_and_event():
    lat = generate_lattice(LatticeSpec(20, 20), 1.0, 0)
    out = bound_mask(lat, 8).ravel()
    I = np.zeros(400)
    I[np.flatnonzero(~out)[0]] = 0.9
    I[np.flatnonzero(out)[0]] = 0.1
    f = bound_fraction(lat, I, 8)
    assert f == pytest.approx(0.1)
    assert percolation_event(0.1) and not percolation_event(0.0999999)
    order = np.flatnonzero(I > 0)
    assert bound_fraction(lat, I[order], 8, site_order=order) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        percolation_event(1.5)
    with pytest.raises(DomainError):
        bound_fraction(lat, np.zeros(400), 8)


def test_fit_exponent_recovers_power_law():
    z = np.arange(0.5, 20.01, 0.5)
    fit = fit_exponent(z, 3.0 * z ** 0.73)
    assert fit.nu == pytest.approx(0.73, abs=1e-12)
    assert np.exp(fit.intercept) == pytest.approx(3.0)
    assert fit.fit_window == (10.0, 20.0) and fit.residual < 1e-12
    fit = fit_exponent(z, np.where(z < 5, 1.0, z), window=(5, 20))
    assert fit.nu == pytest.approx(1.0)


def test_fit_exponent_rejects():
    with pytest.raises(DomainError):
        fit_exponent([1, 2], [1, 2])
    with pytest.raises(DomainError):
        fit_exponent([0, 1, 2, 3], [1, 1, 1, 1], window=(0, 3))
    with pytest.raises(DomainError):
        fit_exponent([1, 2, 3], [1, 2])


def test_bound_examples():
    lat = generate_lattice(LatticeSpec(40, 40), 1.0, 0)
    assert bound_fraction(lat, np.ones(1600), 16) == pytest.approx(1 - 256 / 1600)
    delta = np.zeros((40, 40))
    delta[lat.injection] = 1.0
    assert bound_fraction(lat, delta, 16) == 0.0
    corner = np.zeros((40, 40))
    corner[0, 0] = 1.0
    assert bound_fraction(lat, corner, 16) == 1.0


def test_bound_fraction_non_increasing_in_side(rng):
    lat = generate_lattice(LatticeSpec(30, 30), 1.0, 0)
    I = rng.random(900)
    f = [bound_fraction(lat, I, s) for s in range(1, 29)]
    assert all(b <= a for a, b in zip(f, f[1:]))


def test_ipr_permutation_invariant(rng):
    x = rng.random(300)
    assert ipr(rng.permutation(x)) == pytest.approx(ipr(x), rel=1e-14)


def test_fit_linear_law_exact():
    z = np.arange(0.5, 20.01, 0.5)
    fit = fit_exponent(z, 3.0 * z)
    assert abs(fit.nu - 1.0) < 1e-9 and abs(fit.intercept - np.log(3.0)) < 1e-9
    assert fit_exponent(z, np.sqrt(z)).nu == pytest.approx(0.5)


def test_mean_width_grows_with_P():
    # statistical: 40-trial ensembles on the default 40x40 setup, z = 20 mm
    from qperc.ensemble import ExperimentConfig, run_quantum_trial
    grid = tuple(round(0.1 * k, 1) for k in range(1, 11))
    cfg = ExperimentConfig(P_grid=grid, trials_per_P=40)
    w = []
    for pi, P in enumerate(grid):
        m = np.mean([run_quantum_trial(cfg, P, t, pi).ipr_trace[-1] for t in range(40)])
        w.append(m ** -0.5)
    assert all(b >= a for a, b in zip(w, w[1:])), np.round(w, 3)
