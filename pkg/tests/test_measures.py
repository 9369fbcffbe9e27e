import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bikeshare.errors import AlignmentError, NoExtremumError, ParameterError
from bikeshare.measures import (
    best_lag,
    circulation,
    circulation_variance,
    correlation,
    demand_extrema,
    distribution_stats,
    lag_analysis,
)
from bikeshare.model import ModelParams, Sinusoidal, Stationary
from bikeshare.ode import equilibrium, solve_covariance, solve_mean_field
from bikeshare.sim import SimConfig, replicate

K3 = ModelParams(100, 150, 3)
Y0 = np.array([0.0, 0.5, 0.5, 0.0])


def test_circulation_closed_fleet():
    mf = solve_mean_field(K3, Y0, 5.0)
    c = circulation(mf, None, K3)
    np.testing.assert_allclose(c.mean + 100 * (mf.aggregate @ np.arange(4)), 150.0, atol=1e-9)
    np.testing.assert_array_equal(c.lo, c.mean)
    assert c.mean[0] == pytest.approx(0.0)


def test_circulation_from_simstats():
    s = replicate(SimConfig(K3, np.array([0, 50, 50, 0]), 2.0, replications=3))
    c = circulation(s, None, K3)
    np.testing.assert_allclose(c.mean, s.circ_mean, atol=1e-9)


def test_circulation_alignment():
    mf = solve_mean_field(K3, Y0, 2.0)
    cov = solve_covariance(K3, mf)
    with pytest.raises(AlignmentError):
        circulation(mf, cov[:-1], K3)
    c = circulation(mf, cov, K3)
    assert np.all(c.var >= -1e-10)
    assert c.var[0] == 0.0


def test_circulation_variance_formula():
    S = np.array([[1.0, 0.2], [0.2, 3.0]])
    assert circulation_variance(S, 10) == pytest.approx(30.0)


def test_diagonal_only_lower_bound():
    mf = solve_mean_field(K3, Y0, 5.0)
    for c in solve_covariance(K3, mf)[1:]:
        S = c.cov
        j = np.arange(4)
        off = S - np.diag(np.diag(S))
        weighted = np.outer(j, j) * off
        if np.all(weighted <= 1e-14):
            assert circulation_variance(np.diag(np.diag(S)), 100) >= circulation_variance(S, 100) - 1e-12


def test_equilibrium_circulation_about_sixty():
    e = equilibrium(K3)
    assert 100 * (1.5 - e.mean_occupancy()) == pytest.approx(59.84, abs=0.01)


class TestDistributionStats:
    def test_median_convention(self):
        s = distribution_stats([0.2, 0.3, 0.5])
        assert s.median == 1  # CDF reaches exactly 1/2 at k = 1
        assert s.mean == pytest.approx(1.3)
        assert s.shape == "symmetric"

    def test_shape_labels(self):
        assert distribution_stats([0.7, 0.1, 0.1, 0.1]).shape == "right-skewed"
        assert distribution_stats([0.1, 0.1, 0.1, 0.7]).shape == "left-skewed"

    def test_classes_are_summed(self):
        s = distribution_stats(np.array([[0.1, 0.4], [0.1, 0.4]]))
        assert s.mean == pytest.approx(0.8)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30).filter(lambda v: sum(v) > 1e-6))
    def test_median_is_valid(self, raw):
        y = np.array(raw) / sum(raw)
        m = distribution_stats(y).median
        cdf = np.cumsum(y)
        assert cdf[m] >= 0.5 - 1e-12
        assert m == 0 or cdf[m - 1] < 0.5


class TestLag:
    dem = Sinusoidal(1.0, 0.5, 0.5)

    def test_extrema(self):
        ex = demand_extrema(self.dem, 0.0, 4 * math.pi)
        assert ex == [(math.pi, "max"), (3 * math.pi, "min")]

    def test_phase_shift_recovered(self):
        t = np.round(np.arange(0, 80.0001, 0.1), 10)
        phi = 0.7
        s = np.sin(0.5 * t - phi)
        rep = lag_analysis(t, s, self.dem, burn_in=5.0)
        assert rep.association == "positive"
        assert not rep.missing
        np.testing.assert_allclose(rep.lags(), phi / 0.5, atol=0.1)

    def test_negative_association_pairs_opposite_extrema(self):
        t = np.round(np.arange(0, 80.0001, 0.1), 10)
        s = -np.sin(0.5 * t - 0.4)
        rep = lag_analysis(t, s, self.dem, burn_in=5.0)
        assert rep.association == "negative"
        np.testing.assert_allclose(rep.lags(), 0.8, atol=0.1)

    def test_forced_association(self):
        t = np.round(np.arange(0, 80.0001, 0.1), 10)
        s = -np.sin(0.5 * t)
        rep = lag_analysis(t, s, self.dem, association="positive")
        # peak of -sin lies half a period after the demand peak
        np.testing.assert_allclose(rep.lags(), math.pi / 0.5, atol=0.1)
        with pytest.raises(ParameterError):
            lag_analysis(t, s, self.dem, association="sideways")

    def test_flat_series_has_no_extremum(self):
        t = np.round(np.arange(0, 60.0001, 0.1), 10)
        s = 0.5 * t
        with pytest.raises(NoExtremumError):
            lag_analysis(t, s, self.dem, association="positive")

    def test_needs_two_periods_and_sinusoid(self):
        t = np.arange(0, 10.0, 0.1)
        with pytest.raises(ParameterError):
            lag_analysis(t, np.sin(t), self.dem)
        with pytest.raises(ParameterError):
            lag_analysis(t, np.sin(t), Stationary())
        with pytest.raises(AlignmentError):
            lag_analysis(t, np.sin(t)[:-1], self.dem)

    def test_mean_field_lags_positive_and_depend_on_mu(self):
        p = K3.replace(demand=self.dem)
        out = {}
        for mu in (0.5, 2.0):
            mf = solve_mean_field(p.replace(travel_rate=mu), Y0, 60.0)
            rep = lag_analysis(mf.times, mf.aggregate[:, 0], self.dem, mu=mu, series_k=0)
            assert rep.association == "positive"
            assert np.all(rep.lags() > 0)
            out[mu] = rep.lags().mean()
        assert out[0.5] != pytest.approx(out[2.0], abs=0.05)

    def test_best_lag(self):
        t = np.round(np.arange(0, 80.0001, 0.1), 10)
        lag, lags, corrs = best_lag(t, np.sin(0.5 * t - 0.5), self.dem)
        assert lag == pytest.approx(1.0, abs=0.1)
        assert corrs.max() == pytest.approx(1.0, abs=1e-3)

    def test_correlation(self):
        assert correlation([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        assert correlation([1, 1, 1], [3, 2, 1]) == 0.0
