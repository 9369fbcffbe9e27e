"""Exact event-by-event simulation of the station-occupancy chain.

Stations within a utilization class are exchangeable, so the simulator
tracks only the counts ``n(c, k)`` of class-``c`` stations holding ``k``
bikes.  Transitions:

* retrieval at a class-``c`` station with ``k > 0`` bikes, total rate
  ``n(c, k) * Lambda(t) / r_c``;
* return to a class-``c`` station with ``k < K`` bikes, total rate
  ``n(c, k) * (mu / N) * (M - docked)``.

Time-varying demand is handled by thinning: retrieval candidates fire at the
rate bound ``max_t Lambda(t) / r_c`` and are accepted with probability
``Lambda(t) / max_t Lambda(t)``.

Random streams: replication ``i`` of a run with master seed ``s`` draws from
``numpy.random.PCG64(SeedSequence(s, spawn_key=(i,)))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import ModelParams, Sinusoidal, drift
from .ode import Trajectory, _grid

_BLOCK = 4096


@dataclass
class SimConfig:
    params: ModelParams
    y0_counts: np.ndarray
    horizon: float
    dt: float = 0.1
    replications: int = 50
    master_seed: int = 0

    def __post_init__(self):
        p = self.params
        counts = np.asarray(self.y0_counts)
        if counts.ndim == 1:
            counts = counts[None, :]
        if counts.shape != p.shape:
            raise ParameterError(f"initial counts have shape {counts.shape}, model needs {p.shape}")
        if not np.all(counts == np.round(counts)) or np.any(counts < 0):
            raise ParameterError("initial station counts must be non-negative integers")
        counts = counts.astype(np.int64)
        if counts.sum() != p.n_stations:
            raise ParameterError(f"initial counts sum to {counts.sum()}, expected N={p.n_stations}")
        expected = np.asarray(p.weights) * p.n_stations
        if np.any(np.abs(counts.sum(axis=1) - expected) > 1e-9):
            raise ParameterError("initial class sizes must equal weight * N")
        docked = int(counts.sum(axis=0) @ np.arange(p.capacity + 1))
        if docked > p.fleet_size:
            raise ParameterError(f"{docked} bikes docked initially but the fleet has {p.fleet_size}")
        if self.replications < 1:
            raise ParameterError("replications must be positive")
        _grid(self.horizon, self.dt, self.dt)
        self.y0_counts = counts

    @classmethod
    def from_proportions(cls, params: ModelParams, y0, **kw) -> "SimConfig":
        y0 = np.asarray(y0, dtype=float)
        counts = y0 * params.n_stations
        if np.any(np.abs(counts - np.round(counts)) > 1e-9):
            raise ParameterError("initial proportions times N must be integers")
        return cls(params=params, y0_counts=np.round(counts).astype(np.int64), **kw)


def replication_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


class _Stream:
    """Block-buffered uniforms and exponentials from a numpy generator."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._u: list = []
        self._e: list = []

    def uniform(self) -> float:
        if not self._u:
            self._u = self.rng.random(_BLOCK).tolist()
            self._u.reverse()
        return self._u.pop()

    def exponential(self) -> float:
        if not self._e:
            self._e = self.rng.standard_exponential(_BLOCK).tolist()
            self._e.reverse()
        return self._e.pop()


def thinning_accept(demand, t: float, u: float) -> bool:
    """Accept a candidate fired at rate ``demand.upper_bound`` with probability ``demand(t) / bound``."""
    return u * demand.upper_bound < demand(t)


def nhpp_times(demand, horizon: float, seed=None, scale: float = 1.0) -> np.ndarray:
    """Event times of a Poisson process with intensity ``scale * demand(t)`` on ``[0, horizon]``."""
    stream = _Stream(_rng(seed))
    bound = scale * demand.upper_bound
    t = 0.0
    out = []
    while True:
        t += stream.exponential() / bound
        if t > horizon:
            return np.array(out)
        if thinning_accept(demand, t, stream.uniform()):
            out.append(t)


def _run_path(params: ModelParams, counts0, horizon, dt, stream: _Stream, record_events=False):
    n_out = int(round(horizon / dt))
    times = dt * np.arange(n_out + 1)
    C, K1 = params.shape
    K = K1 - 1
    N = params.n_stations
    M = params.fleet_size
    r = params.r.tolist()
    demand = params.demand
    thinning = not demand.is_stationary
    bound = demand.upper_bound
    lam = [bound / rc for rc in r]
    ret_coef = params.travel_rate / N

    cnt = [list(map(int, row)) for row in counts0]
    size = [sum(row) for row in cnt]
    nonempty = [size[c] - cnt[c][0] for c in range(C)]
    notfull = [size[c] - cnt[c][K] for c in range(C)]
    docked = sum(k * sum(cnt[c][k] for c in range(C)) for k in range(K1))
    circ = M - docked

    out = np.empty((n_out + 1, C, K1), dtype=np.int64)
    out[0] = cnt
    g = 1
    t = 0.0
    events = [] if record_events else None
    while g <= n_out:
        s_ret = 0.0
        for c in range(C):
            s_ret += lam[c] * nonempty[c]
        nf = 0
        for c in range(C):
            nf += notfull[c]
        s_back = ret_coef * circ * nf
        total = s_ret + s_back
        if total <= 0.0:
            break
        t += stream.exponential() / total
        while g <= n_out and times[g] < t:
            out[g] = cnt
            g += 1
        if g > n_out:
            break
        u = stream.uniform() * total
        if u < s_ret:
            if thinning and not thinning_accept(demand, t, stream.uniform()):
                continue
            c, v = _pick(u, [lam[c] * nonempty[c] for c in range(C)])
            row = cnt[c]
            n = _pick_slot(row, 1, K1, v / lam[c])
            row[n] -= 1
            row[n - 1] += 1
            if n == 1:
                nonempty[c] -= 1
            if n == K:
                notfull[c] += 1
            circ += 1
            if record_events:
                events.append(t)
        else:
            rate = ret_coef * circ
            c, v = _pick(u - s_ret, [rate * notfull[c] for c in range(C)])
            row = cnt[c]
            n = _pick_slot(row, 0, K, v / rate)
            row[n] -= 1
            row[n + 1] += 1
            if n == 0:
                nonempty[c] += 1
            if n + 1 == K:
                notfull[c] -= 1
            circ -= 1
    while g <= n_out:
        out[g] = cnt
        g += 1
    return times, out, (np.array(events) if record_events else None)


def _pick(u: float, weights):
    """Index chosen by ``u`` in ``[0, sum(weights))`` and the leftover offset."""
    last = 0
    for i, w in enumerate(weights):
        if w > 0:
            last = i
            if u < w:
                return i, u
            u -= w
    # round-off pushed u past the end
    return last, 0.0


def _pick_slot(row, lo: int, hi: int, v: float) -> int:
    last = lo
    for n in range(lo, hi):
        if row[n] > 0:
            last = n
            if v < row[n]:
                return n
            v -= row[n]
    return last


def simulate_path(cfg: SimConfig, seed=None, record_events: bool = False) -> Trajectory:
    """One realization of the empirical measure on the output grid (proportions)."""
    stream = _Stream(_rng(cfg.master_seed if seed is None else seed))
    times, counts, events = _run_path(
        cfg.params, cfg.y0_counts, cfg.horizon, cfg.dt, stream, record_events
    )
    return Trajectory(
        times=times, states=counts / cfg.params.n_stations, step=cfg.dt, retrieval_times=events
    )


def simulate_path_nonstationary(cfg: SimConfig, seed=None, record_events: bool = False) -> Trajectory:
    if not isinstance(cfg.params.demand, Sinusoidal):
        raise ParameterError("simulate_path_nonstationary needs sinusoidal demand")
    return simulate_path(cfg, seed, record_events)


@dataclass
class SimStats:
    """Across-replication moments of the aggregated occupancy and of circulation."""

    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    circ_mean: np.ndarray
    circ_var: np.ndarray
    replications: int

    @property
    def band_lo(self) -> np.ndarray:
        return self.mean - 2.0 * np.sqrt(self.var)

    @property
    def band_hi(self) -> np.ndarray:
        return self.mean + 2.0 * np.sqrt(self.var)


class _Welford:
    def __init__(self):
        self.n = 0
        self.mean = None
        self.m2 = None

    def push(self, x: np.ndarray):
        self.n += 1
        if self.mean is None:
            self.mean = np.array(x, dtype=float)
            self.m2 = np.zeros_like(self.mean)
            return
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    @property
    def var(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self.m2 / (self.n - 1)


def _replica(args):
    cfg, index, seed = args
    rng = replication_rng(cfg.master_seed, index) if seed is None else _rng(seed)
    return _run_path(cfg.params, cfg.y0_counts, cfg.horizon, cfg.dt, _Stream(rng))[1]


def replicate(cfg: SimConfig, workers: int = 1, seeds=None) -> SimStats:
    """Run ``cfg.replications`` independent paths and accumulate moments in index order.

    ``seeds`` overrides the per-replication streams (one entry per replication).
    """
    p = cfg.params
    R = cfg.replications
    if R < 2:
        raise ParameterError("replicate needs at least two replications")
    if seeds is not None and len(seeds) != R:
        raise ParameterError("need one seed per replication")
    jobs = [(cfg, i, None if seeds is None else seeds[i]) for i in range(R)]
    ks = np.arange(p.capacity + 1)
    occ = _Welford()
    circ = _Welford()

    def consume(counts):
        y = counts.sum(axis=1) / p.n_stations
        occ.push(y)
        circ.push(p.fleet_size - p.n_stations * (y @ ks))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for counts in pool.map(_replica, jobs, chunksize=max(1, R // (4 * workers))):
                consume(counts)
    else:
        for job in jobs:
            consume(_replica(job))
    n_out = int(round(cfg.horizon / cfg.dt))
    return SimStats(
        times=cfg.dt * np.arange(n_out + 1),
        mean=occ.mean,
        var=occ.var,
        circ_mean=circ.mean,
        circ_var=circ.var,
        replications=R,
    )


@dataclass
class MomentRateReport:
    k: int
    t: float
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float

    @property
    def z(self) -> float:
        se = math.hypot(self.lhs_se, self.rhs_se)
        return (self.lhs - self.rhs) / se if se > 0 else 0.0


def moment_rate_check(cfg: SimConfig, k: int, t: float, window: float) -> MomentRateReport:
    """Compare d/dt E[Y_t(k)] (finite difference of replicated means) with the
    Monte-Carlo mean of the exact finite-N rate expression at time ``t``.

    The finite-N drift is the mean-field drift evaluated with ``gamma = M/N``
    exactly, so the right-hand side is ``E[drift(Y_t)(k)]``.  A centred
    difference is used when ``t >= window``, a forward difference otherwise.
    """
    p = cfg.params
    if not p.demand.is_stationary:
        raise ParameterError("moment_rate_check requires stationary demand")
    if not 0 <= k <= p.capacity:
        raise ParameterError(f"k must lie in 0..{p.capacity}")
    centred = t >= window - 1e-12
    lo = t - window if centred else t
    hi = t + window
    # grid with spacing `window` starting at 0 must hit lo, t and hi
    n_t = t / window
    if abs(n_t - round(n_t)) > 1e-9:
        raise ParameterError("t must be a multiple of the window")
    i_t = int(round(n_t))
    i_lo = i_t - 1 if centred else i_t
    i_hi = i_t + 1
    run = SimConfig(
        params=p, y0_counts=cfg.y0_counts, horizon=hi, dt=window,
        replications=cfg.replications, master_seed=cfg.master_seed,
    )
    diffs = np.empty(run.replications)
    rates = np.empty(run.replications)
    for i in range(run.replications):
        counts = _replica((run, i, None))
        Y = counts / p.n_stations
        diffs[i] = (Y[i_hi].sum(axis=0)[k] - Y[i_lo].sum(axis=0)[k]) / (hi - lo)
        rates[i] = drift(Y[i_t], p, t).sum(axis=0)[k]
    R = run.replications
    return MomentRateReport(
        k=k,
        t=t,
        lhs=float(diffs.mean()),
        lhs_se=float(diffs.std(ddof=1) / math.sqrt(R)),
        rhs=float(rates.mean()),
        rhs_se=float(rates.std(ddof=1) / math.sqrt(R)),
    )
