"""Brute-force transient analysis of the per-station chain for tiny systems.

The state is the full occupancy vector ``x = (x_1, ..., x_N)`` with
``0 <= x_i <= K`` and ``sum(x) <= M``.  Transient distributions come from
uniformization, so this module shares no code path with the simulator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.stats import poisson

from .errors import CapacityError, ParameterError
from .model import ModelParams

MAX_STATES = 10**6


@dataclass
class TinyStateSpace:
    n_stations: int
    capacity: int
    fleet_size: int
    states: np.ndarray
    index: dict

    def __len__(self):
        return len(self.states)

    @classmethod
    def enumerate(cls, n_stations: int, capacity: int, fleet_size: int, limit: int = MAX_STATES):
        bound = (capacity + 1) ** n_stations
        if bound > limit:
            # cheap pre-check; the sum(x) <= M filter can only shrink the space
            admissible = sum(
                1 for _ in itertools.islice(_admissible(n_stations, capacity, fleet_size), limit + 1)
            )
            if admissible > limit:
                raise CapacityError(f"state space exceeds {limit} states")
        states = np.array(list(_admissible(n_stations, capacity, fleet_size)), dtype=np.int64)
        if len(states) > limit:
            raise CapacityError(f"state space has {len(states)} states (limit {limit})")
        index = {tuple(s): i for i, s in enumerate(states.tolist())}
        return cls(n_stations, capacity, fleet_size, states, index)


def _admissible(n, K, M):
    for x in itertools.product(range(K + 1), repeat=n):
        if sum(x) <= M:
            yield x


def station_rates_from_params(params: ModelParams) -> np.ndarray:
    """Per-station retrieval rates with class sizes ``weight * N`` (stations ordered by class)."""
    sizes = np.asarray(params.weights) * params.n_stations
    if np.any(np.abs(sizes - np.round(sizes)) > 1e-9):
        raise ParameterError("class weights times N must be integers")
    return np.repeat(params.class_rates(0.0), np.round(sizes).astype(int))


def build_generator(params: ModelParams, station_rates=None, limit: int = MAX_STATES):
    """Sparse generator ``Q`` of the per-station chain and its state space.

    Drop-off at station ``i``: ``mu * P_i * (M - sum(x))`` while ``x_i < K``,
    with uniform routing ``P_i = 1/N``.  Pick-up: ``lambda_i`` while ``x_i > 0``.
    """
    if not params.demand.is_stationary:
        raise ParameterError("the exact oracle needs stationary demand")
    N, K, M = params.n_stations, params.capacity, params.fleet_size
    lam = station_rates_from_params(params) if station_rates is None else np.asarray(station_rates, float)
    if lam.shape != (N,) or np.any(lam <= 0):
        raise ParameterError("need one positive retrieval rate per station")
    space = TinyStateSpace.enumerate(N, K, M, limit)
    rows, cols, vals = [], [], []
    back = params.travel_rate / N
    for i, x in enumerate(space.states.tolist()):
        free = M - sum(x)
        for s in range(N):
            if x[s] > 0:
                y = list(x)
                y[s] -= 1
                rows.append(i)
                cols.append(space.index[tuple(y)])
                vals.append(lam[s])
            if x[s] < K and free > 0:
                y = list(x)
                y[s] += 1
                rows.append(i)
                cols.append(space.index[tuple(y)])
                vals.append(back * free)
    n = len(space)
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    Q = Q - sparse.diags(np.asarray(Q.sum(axis=1)).ravel())
    return Q.tocsr(), space


def transient(Q, p0, t: float, tail: float = 1e-12) -> np.ndarray:
    """Distribution at time ``t`` by uniformization, truncating Poisson mass below ``tail``."""
    p0 = np.asarray(p0, dtype=float)
    if t < 0:
        raise ParameterError("t must be non-negative")
    if t == 0:
        return p0.copy()
    Q = sparse.csr_matrix(Q)
    rate = float(np.max(-Q.diagonal()))
    if rate == 0:
        return p0.copy()
    P = (sparse.identity(Q.shape[0], format="csr") + Q / rate).T.tocsr()
    lt = rate * t
    n_max = int(poisson.isf(tail, lt)) + 1
    n_min = int(poisson.ppf(tail, lt)) if lt > 50 else 0
    weights = poisson.pmf(np.arange(n_max + 1), lt)
    v = p0.copy()
    out = np.zeros_like(v)
    for n in range(n_max + 1):
        if n >= n_min:
            out += weights[n] * v
        v = P @ v
    out /= weights[n_min:].sum()
    return out


def stationary_distribution(Q) -> np.ndarray:
    """Null vector of ``Q^T`` normalized to a probability vector."""
    A = np.asarray(sparse.csr_matrix(Q).T.todense())
    n = A.shape[0]
    A = np.vstack([A, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def expected_empirical(dist, space: TinyStateSpace) -> np.ndarray:
    """``E[Y(k)]``: probability-weighted occupancy histograms, k = 0..K."""
    K = space.capacity
    hist = np.zeros((len(space), K + 1))
    rows = np.repeat(np.arange(len(space)), space.n_stations)
    np.add.at(hist, (rows, space.states.ravel()), 1.0)
    return np.asarray(dist, dtype=float) @ hist / space.n_stations
