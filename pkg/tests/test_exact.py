import math

import numpy as np
import pytest
from scipy.linalg import expm

from bikeshare.errors import CapacityError, ParameterError
from bikeshare.exact import (
    TinyStateSpace,
    build_generator,
    expected_empirical,
    stationary_distribution,
    transient,
)
from bikeshare.model import ModelParams, Sinusoidal


def start(space, x):
    p0 = np.zeros(len(space))
    p0[space.index[tuple(x)]] = 1.0
    return p0


def test_state_space_counts():
    s = TinyStateSpace.enumerate(2, 2, 2)
    # (K+1)^N = 9 states minus those holding more than M bikes: (1,2),(2,1),(2,2)
    assert len(s) == 6
    assert all(sum(x) <= 2 for x in s.states.tolist())


def test_capacity_guard():
    with pytest.raises(CapacityError):
        TinyStateSpace.enumerate(8, 9, 80, limit=1000)


def test_single_station_generator():
    Q, space = build_generator(ModelParams(1, 1, 1))
    dense = Q.toarray()
    i0, i1 = space.index[(0,)], space.index[(1,)]
    assert dense[i0, i1] == 1.0 and dense[i1, i0] == 1.0
    p = transient(Q, start(space, (1,)), 1.0)
    # two-state chain with unit rates: P(stay docked) = (1 + e^{-2t}) / 2
    assert p[i1] == pytest.approx((1 + math.exp(-2.0)) / 2, abs=1e-12)


def test_generator_rows_and_rates():
    p = ModelParams(2, 1, 1)
    Q, space = build_generator(p)
    dense = Q.toarray()
    np.testing.assert_allclose(dense.sum(axis=1), 0.0, atol=1e-14)
    i = space.index[(0, 0)]
    # one bike riding, returned to either station with rate mu * 1/N each
    assert dense[i, space.index[(1, 0)]] == pytest.approx(0.5)
    assert dense[i, space.index[(0, 1)]] == pytest.approx(0.5)


def test_transient_matches_expm():
    p = ModelParams(3, 4, 2)
    Q, space = build_generator(p, station_rates=[1.0, 2.0, 0.5])
    p0 = start(space, (2, 1, 0))
    for t in (0.3, 1.0, 4.0):
        ref = p0 @ expm(Q.toarray() * t)
        got = transient(Q, p0, t)
        np.testing.assert_allclose(got, ref, atol=1e-10)
        assert got.sum() == pytest.approx(1.0, abs=1e-12)
        assert got.min() >= -1e-15


def test_transient_long_time_reaches_stationary():
    p = ModelParams(2, 2, 2)
    Q, space = build_generator(p)
    pi = stationary_distribution(Q)
    np.testing.assert_allclose(pi @ Q.toarray(), 0.0, atol=1e-12)
    np.testing.assert_allclose(transient(Q, start(space, (1, 1)), 100.0), pi, atol=1e-10)


def test_transient_edge_cases():
    Q, space = build_generator(ModelParams(1, 1, 1))
    p0 = start(space, (0,))
    np.testing.assert_array_equal(transient(Q, p0, 0.0), p0)
    with pytest.raises(ParameterError):
        transient(Q, p0, -1.0)


def test_expected_empirical():
    space = TinyStateSpace.enumerate(2, 2, 2)
    dist = 0.5 * start(space, (1, 1)) + 0.5 * start(space, (0, 2))
    np.testing.assert_allclose(expected_empirical(dist, space), [0.25, 0.5, 0.25])


def test_reference_values_n2k2m2():
    # frozen reference for the simulation agreement check
    Q, space = build_generator(ModelParams(2, 2, 2))
    p0 = start(space, (1, 1))
    ref = {
        0.5: [0.3408, 0.6299, 0.0293],
        1.0: [0.4777, 0.4596, 0.0627],
        2.0: [0.5467, 0.3574, 0.0959],
    }
    for t, v in ref.items():
        np.testing.assert_allclose(expected_empirical(transient(Q, p0, t), space), v, atol=1e-4)


def test_rejects_nonstationary_and_bad_rates():
    with pytest.raises(ParameterError):
        build_generator(ModelParams(2, 2, 2, demand=Sinusoidal()))
    with pytest.raises(ParameterError):
        build_generator(ModelParams(2, 2, 2), station_rates=[1.0])


def test_classes_expand_to_stations():
    p = ModelParams(2, 2, 1, classes=((1.0, 0.5), (0.5, 0.5)))
    Q, space = build_generator(p)
    dense = Q.toarray()
    # station 2 belongs to the r = 1/2 class and is retrieved from twice as fast
    assert dense[space.index[(0, 1)], space.index[(0, 0)]] == pytest.approx(2.0)
    assert dense[space.index[(1, 0)], space.index[(0, 0)]] == pytest.approx(1.0)
