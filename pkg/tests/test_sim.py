import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bikeshare.errors import ParameterError
from bikeshare.model import ModelParams, Sinusoidal, Stationary
from bikeshare.ode import solve_mean_field
from bikeshare.sim import (
    SimConfig,
    _pick,
    _pick_slot,
    _run_path,
    _Stream,
    moment_rate_check,
    nhpp_times,
    replicate,
    replication_rng,
    simulate_path,
    simulate_path_nonstationary,
    thinning_accept,
)


def k3_config(n=100, reps=20, horizon=5.0, seed=0, **kw):
    p = ModelParams(n, int(1.5 * n), 3, **kw)
    y0 = np.array([0, n // 2, n - n // 2, 0])
    return SimConfig(p, y0, horizon=horizon, replications=reps, master_seed=seed)


class TestConfig:
    def test_rejects_bad_counts(self):
        p = ModelParams(10, 15, 3)
        with pytest.raises(ParameterError):
            SimConfig(p, np.array([0, 5, 4, 0]), 1.0)
        with pytest.raises(ParameterError):
            SimConfig(p, np.array([0, 0, 0, 10]), 1.0)  # 30 bikes docked, fleet 15
        with pytest.raises(ParameterError):
            SimConfig(p, np.array([0, 5, 5]), 1.0)
        with pytest.raises(ParameterError):
            SimConfig(p, np.array([0, 5, 5, 0]), 1.0, dt=0.3)

    def test_class_sizes(self):
        p = ModelParams(10, 10, 2, classes=((1.0, 0.5), (0.5, 0.5)))
        SimConfig(p, np.array([[5, 0, 0], [5, 0, 0]]), 1.0)
        with pytest.raises(ParameterError):
            SimConfig(p, np.array([[6, 0, 0], [4, 0, 0]]), 1.0)

    def test_from_proportions(self):
        p = ModelParams(10, 15, 3)
        cfg = SimConfig.from_proportions(p, [[0, 0.5, 0.5, 0]], horizon=1.0)
        assert cfg.y0_counts.tolist() == [[0, 5, 5, 0]]
        with pytest.raises(ParameterError):
            SimConfig.from_proportions(p, [[0, 0.55, 0.45, 0]], horizon=1.0)


class TestHelpers:
    def test_pick(self):
        assert _pick(0.5, [1.0, 2.0]) == (0, 0.5)
        i, v = _pick(1.5, [1.0, 2.0])
        assert i == 1 and v == pytest.approx(0.5)
        # zero-weight entries are never selected, even at round-off
        assert _pick(3.0, [1.0, 2.0, 0.0])[0] == 1

    def test_pick_slot_skips_empty(self):
        row = [3, 0, 2, 0]
        assert _pick_slot(row, 0, 4, 2.9) == 0
        assert _pick_slot(row, 0, 4, 3.1) == 2
        assert _pick_slot(row, 1, 4, 0.0) == 2
        assert _pick_slot(row, 1, 4, 99.0) == 2

    def test_stream_blocks_are_reproducible(self):
        a = _Stream(replication_rng(7, 3))
        b = _Stream(replication_rng(7, 3))
        xa = [a.uniform() for _ in range(5000)] + [a.exponential() for _ in range(5000)]
        xb = [b.uniform() for _ in range(5000)] + [b.exponential() for _ in range(5000)]
        assert xa == xb
        c = _Stream(replication_rng(7, 4))
        assert c.uniform() != xa[0]

    def test_thinning_accept(self):
        d = Sinusoidal(1.0, 0.5, 1.0)
        t = math.pi / 2  # demand at its bound
        assert thinning_accept(d, t, 0.999999)
        t = 3 * math.pi / 2  # demand = 0.5, bound 1.5
        assert thinning_accept(d, t, 0.3)
        assert not thinning_accept(d, t, 0.34)


class TestPaths:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(2, 12))
    def test_conservation_and_bounds(self, seed, K, n):
        gamma = K / 2
        M = int(gamma * n)
        y0 = np.zeros(K + 1, dtype=int)
        y0[0] = n
        p = ModelParams(n, M, K, demand=Stationary(1.3), travel_rate=0.8,
                        classes=((1.0, 1.0),))
        _, counts, _ = _run_path(p, y0[None, :], 5.0, 0.01, _Stream(replication_rng(seed, 0)))
        assert np.all(counts >= 0)
        assert np.all(counts.sum(axis=(1, 2)) == n)
        docked = counts.sum(axis=1) @ np.arange(K + 1)
        assert np.all((docked >= 0) & (docked <= M))

    def test_boundary_no_moves_from_impossible_states(self):
        # one station, one bike: the only states are docked/ridden
        p = ModelParams(1, 1, 1)
        _, counts, _ = _run_path(p, np.array([[1, 0]]), 50.0, 0.01, _Stream(replication_rng(0, 0)))
        assert set(map(tuple, counts[:, 0].tolist())) <= {(1, 0), (0, 1)}

    def test_fixed_state_when_no_bikes(self):
        p = ModelParams(5, 0, 2)
        tr = simulate_path(SimConfig(p, np.array([5, 0, 0]), 2.0))
        np.testing.assert_array_equal(tr.aggregate, np.tile([1.0, 0.0, 0.0], (21, 1)))

    def test_determinism(self):
        cfg = k3_config(reps=5)
        a = replicate(cfg)
        b = replicate(cfg)
        for f in ("mean", "var", "circ_mean", "circ_var"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
        c = replicate(k3_config(reps=5, seed=1))
        assert not np.array_equal(a.mean, c.mean)

    def test_workers_do_not_change_results(self):
        cfg = k3_config(reps=4, horizon=2.0)
        np.testing.assert_array_equal(replicate(cfg).mean, replicate(cfg, workers=2).mean)

    def test_explicit_seeds(self):
        cfg = k3_config(reps=3, horizon=1.0)
        s = replicate(cfg, seeds=[11, 12, 13])
        paths = [simulate_path(cfg, seed=x).aggregate for x in (11, 12, 13)]
        np.testing.assert_allclose(s.mean, np.mean(paths, axis=0), atol=1e-15)
        with pytest.raises(ParameterError):
            replicate(cfg, seeds=[1])

    def test_replicate_needs_two(self):
        with pytest.raises(ParameterError):
            replicate(k3_config(reps=1))

    def test_circulation_closed_fleet(self):
        cfg = k3_config(reps=3)
        s = replicate(cfg)
        p = cfg.params
        np.testing.assert_allclose(s.circ_mean + p.n_stations * (s.mean @ np.arange(4)), p.fleet_size)

    def test_nonstationary_requires_sinusoid(self):
        with pytest.raises(ParameterError):
            simulate_path_nonstationary(k3_config())
        tr = simulate_path_nonstationary(k3_config(demand=Sinusoidal(1.0, 0.5, 0.5)), record_events=True)
        assert tr.retrieval_times.size > 0
        assert np.all(np.diff(tr.retrieval_times) > 0)


class TestAgainstLimits:
    def test_mean_tracks_mean_field(self):
        cfg = k3_config(n=200, reps=20, horizon=5.0)
        s = replicate(cfg)
        mf = solve_mean_field(cfg.params, cfg.y0_counts / 200, 5.0)
        assert np.max(np.abs(s.mean - mf.aggregate)) < 0.03

    def test_error_shrinks_with_n(self):
        errs = []
        ns = (50, 100, 200, 400)
        for n in ns:
            cfg = k3_config(n=n, reps=20, horizon=5.0, seed=3)
            mf = solve_mean_field(cfg.params, cfg.y0_counts / n, 5.0).aggregate
            sups = [
                np.max(np.abs(simulate_path(cfg, seed=replication_rng(3, i)).aggregate - mf))
                for i in range(cfg.replications)
            ]
            errs.append(np.mean(sups))
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert -0.7 < slope < -0.3

    def test_moment_rate_identity(self):
        cfg = k3_config(n=50, reps=400)
        for k in (0, 2):
            rep = moment_rate_check(cfg, k, t=1.0, window=0.05)
            assert abs(rep.z) < 4
        rep = moment_rate_check(cfg, 1, t=0.0, window=0.05)
        assert abs(rep.z) < 4
        with pytest.raises(ParameterError):
            moment_rate_check(cfg, 1, t=0.07, window=0.05)


class TestThinning:
    def test_stationary_counts(self):
        ev = nhpp_times(Stationary(3.0), 1000.0, seed=1)
        assert abs(ev.size - 3000) < 4 * math.sqrt(3000)

    def test_bins_match_integral(self):
        d = Sinusoidal(2.0, 0.8, 0.5, 0.3)
        horizon = 4 * d.period
        ev = nhpp_times(d, horizon, seed=5)
        edges = np.linspace(0, horizon, 41)
        counts, _ = np.histogram(ev, edges)
        expect = np.array([d.integral(a, b) for a, b in zip(edges[:-1], edges[1:])])
        chi2 = float(np.sum((counts - expect) ** 2 / expect))
        assert stats.chi2.sf(chi2, len(counts)) > 1e-3

    def test_scale(self):
        a = nhpp_times(Stationary(1.0), 500.0, seed=2, scale=4.0)
        assert abs(a.size - 2000) < 4 * math.sqrt(2000)
