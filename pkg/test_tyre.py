import math

import numpy as np
import pytest

from epbabs.exceptions import ConfigurationError, DomainError
from epbabs.tyre import (TyreParams, base_peak_mu, build_lookup, initial_slope, lookup_error, mf_base_force,
                         mf_factors, tyre_force)

P = TyreParams()


def test_factors_at_4kn():
    b, c, d, e = mf_factors(P, 4.0)
    assert c == pytest.approx(1.55)
    assert d == pytest.approx(4000.0)
    assert e == pytest.approx(0.2)
    assert b == pytest.approx(0.1765, rel=1e-3)


@pytest.mark.parametrize('fz', [0.5, 1.0, 2.5, 6.0, 10.0])
def test_peak_factor_is_1000_per_kn(fz):
    b, c, d, e = mf_factors(P, fz)
    assert d == pytest.approx(1000.0 * fz)
    assert all(math.isfinite(v) for v in (b, c, d, e))
    assert b > 0 and c > 0


@pytest.mark.parametrize('fz', [0.49, 10.5, -1.0])
def test_factors_reject_out_of_range_load(fz):
    with pytest.raises(DomainError, match=str(fz)):
        mf_factors(P, fz)


def test_base_force_shape():
    assert mf_base_force(P, 0.0, 4.0) == 0.0
    near_peak = mf_base_force(P, 10.0, 4.0)
    assert near_peak == pytest.approx(4000.0, rel=0.01)
    assert mf_base_force(P, 100.0, 4.0) < near_peak


def test_base_force_within_peak_bound():
    for slip in np.linspace(0.0, 100.0, 401):
        f = mf_base_force(P, float(slip), 4.0)
        assert 0.0 <= f <= 1.05 * 4000.0


def test_tyre_force_zero_slip_is_exactly_zero():
    assert tyre_force(P, 0.0, 4268.0, 0.8) == 0.0
    assert tyre_force(P, 0.1, 0.0, 0.8) == 0.0


def test_tyre_force_scales_with_mu():
    high = tyre_force(P, 0.12, 4268.0, 0.8)
    low = tyre_force(P, 0.12, 4268.0, 0.4)
    assert low == pytest.approx(0.5 * high, rel=1e-12)


def test_tyre_force_light_load_scales_linearly():
    half = tyre_force(P, 0.1, 250.0, 1.0)
    full = tyre_force(P, 0.1, 500.0, 1.0)
    assert half == pytest.approx(0.5 * full)


@pytest.mark.parametrize('slip, mu', [(0.1, 1.3), (0.1, 0.01), (1.2, 0.8), (-0.1, 0.8)])
def test_tyre_force_rejects_out_of_range(slip, mu):
    with pytest.raises(DomainError):
        tyre_force(P, slip, 4000.0, mu)


@pytest.mark.parametrize('fz', [2000.0, 3000.0, 4000.0, 5000.0, 6000.0])
def test_base_peak_mu_near_one(fz):
    assert 0.95 <= base_peak_mu(P, fz) <= 1.05


def test_initial_slope_matches_small_slip_limit():
    k = initial_slope(P, 4268.0)
    assert k == pytest.approx(26.9, rel=0.01)
    secant = tyre_force(P, 1e-5, 4268.0, 1.0) / 4268.0 / 1e-5
    assert secant == pytest.approx(k, rel=1e-3)


def test_invalid_shape_factor_rejected():
    with pytest.raises(ConfigurationError):
        TyreParams(a2=2.5).validate()
    TyreParams().validate()


@pytest.fixture(scope='module')
def curve():
    return build_lookup(P)


def test_lookup_reproduces_grid_nodes(curve):
    direct = 0.8 * mf_base_force(P, 10.0, 4.0)
    assert curve.force(0.10, 4000.0, 0.8).item() == pytest.approx(direct, rel=1e-9)
    assert curve.force(0.0, 3500.0, 0.5).item() == 0.0


def test_lookup_agrees_with_formula(curve):
    assert lookup_error(curve, samples=2000, seed=3) <= 0.01
    assert tyre_force(curve, 0.15, 4100.0, 0.7) == pytest.approx(tyre_force(P, 0.15, 4100.0, 0.7), rel=0.01)


def test_lookup_peak_slip_and_slope(curve):
    assert curve.peak_slip(4000.0) == pytest.approx(10.0, abs=2.0)
    assert initial_slope(curve, 4000.0) == pytest.approx(initial_slope(P, 4000.0), rel=0.05)


def test_lookup_rejects_short_grid():
    with pytest.raises(ConfigurationError):
        build_lookup(P, load_grid=[2.0, 4.0])


@pytest.mark.parametrize('fz', [2000.0, 4000.0, 6000.0])
def test_force_rises_to_a_single_peak(fz):
    slips = np.linspace(0.0, 1.0, 10001)
    forces = np.array([tyre_force(P, float(s), fz, 0.8) for s in slips])
    peak = int(np.argmax(forces))
    assert 0.05 < slips[peak] < 0.2
    assert np.all(np.diff(forces[:peak + 1]) > 0.0)
    assert np.all(np.diff(forces[peak:]) <= 0.0)


@pytest.mark.filterwarnings('error')
def test_lookup_scalar_queries_stay_scalar(curve):
    value = tyre_force(curve, 0.12, 4268.0, 0.8)
    assert isinstance(value, float)
    assert value == pytest.approx(tyre_force(P, 0.12, 4268.0, 0.8), rel=0.01)
    assert isinstance(curve.peak_slip(4268.0), float)
    assert isinstance(initial_slope(curve, 4268.0), float)
