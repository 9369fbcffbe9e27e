"""Performance measures derived from mean-field, diffusion and simulation output."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, NoExtremumError, ParameterError
from .model import ModelParams, Sinusoidal, Stationary
from .ode import equilibrium
from .sim import SimStats


@dataclass
class CirculationSeries:
    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray

    @property
    def lo(self) -> np.ndarray:
        return self.mean - 2.0 * np.sqrt(self.var)

    @property
    def hi(self) -> np.ndarray:
        return self.mean + 2.0 * np.sqrt(self.var)


def circulation_variance(cov: np.ndarray, n_stations: int) -> float:
    """``N * j^T Sigma j``: variance of the number of riding bikes from the diffusion covariance."""
    j = np.arange(cov.shape[0], dtype=float)
    return float(n_stations * (j @ cov @ j))


def circulation(source, covariance, params: ModelParams) -> CirculationSeries:
    """Bikes in circulation ``N * (gamma - sum_j j y(j))`` with diffusion variance.

    ``source`` is a mean-field :class:`Trajectory` or a :class:`SimStats`;
    ``covariance`` is the list returned by ``solve_covariance`` on the same
    grid, or ``None`` for a zero-width band.
    """
    if isinstance(source, SimStats):
        times, y = source.times, source.mean
    else:
        times, y = source.times, source.aggregate
    ks = np.arange(y.shape[1])
    mean = params.n_stations * (params.gamma - y @ ks)
    if covariance is None:
        var = np.zeros_like(mean)
    else:
        if len(covariance) != len(times):
            raise AlignmentError(
                f"covariance series has {len(covariance)} points, trajectory has {len(times)}"
            )
        var = np.array([circulation_variance(c.cov, params.n_stations) for c in covariance])
    return CirculationSeries(times=np.asarray(times), mean=mean, var=var)


def avg_bikes_vs_lambda(params: ModelParams, rates, **eq_kw):
    """Equilibrium mean occupancy ``sum_n n y(n)`` for each stationary arrival rate."""
    out = []
    for lam in rates:
        e = equilibrium(params.replace(demand=Stationary(float(lam))), **eq_kw)
        out.append((float(lam), e.mean_occupancy()))
    return out


@dataclass
class DistributionStats:
    mean: float
    median: int
    skew: float

    @property
    def shape(self) -> str:
        if abs(self.skew) <= 0.5:
            return "symmetric"
        return "right-skewed" if self.skew > 0 else "left-skewed"


def distribution_stats(y) -> DistributionStats:
    """Mean, median (smallest k with CDF >= 1/2) and mean - median."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 2:
        y = y.sum(axis=0)
    mean = float(y @ np.arange(y.size))
    median = int(np.argmax(np.cumsum(y) >= 0.5 - 1e-12))
    return DistributionStats(mean=mean, median=median, skew=mean - median)


@dataclass
class LagEntry:
    extremum_type: str
    lambda_time: float
    series_time: float

    @property
    def lag(self) -> float:
        return self.series_time - self.lambda_time


@dataclass
class LagReport:
    series_k: object
    mu: float
    association: str
    entries: list = field(default_factory=list)
    missing: list = field(default_factory=list)

    def lags(self, extremum_type=None) -> np.ndarray:
        return np.array(
            [e.lag for e in self.entries if extremum_type in (None, e.extremum_type)]
        )


def demand_extrema(demand: Sinusoidal, start: float, stop: float):
    """Analytic peaks and valleys of the sinusoid in ``[start, stop]`` as ``(time, type)``."""
    w, ph = demand.angular_frequency, demand.phase
    out = []
    for kind, base in (("max", math.pi / 2), ("min", 3 * math.pi / 2)):
        m = math.ceil((w * start + ph - base) / (2 * math.pi))
        while True:
            t = (base + 2 * math.pi * m - ph) / w
            if t > stop:
                break
            if t >= start:
                out.append((t, kind))
            m += 1
    return sorted(out)


def _refine(times, values, i):
    # parabolic vertex through the three samples around i
    if 0 < i < len(values) - 1:
        a, b, c = values[i - 1], values[i], values[i + 1]
        den = a - 2 * b + c
        if den != 0:
            return times[i] + 0.5 * (a - c) / den * (times[i + 1] - times[i])
    return times[i]


def correlation(a, b) -> float:
    a = np.asarray(a, float) - np.mean(a)
    b = np.asarray(b, float) - np.mean(b)
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else 0.0


def lag_analysis(
    times,
    series,
    demand: Sinusoidal,
    burn_in: float = 5.0,
    series_k=None,
    mu: float = 1.0,
    association: str = "auto",
    strict: bool = False,
) -> LagReport:
    """Delay between each demand extremum and the matching extremum of ``series``.

    Each demand extremum after ``burn_in`` is paired with the first local
    extremum of the series at or after it and within one period, located on
    the grid and refined by a parabola through the neighbouring samples.
    For a positively associated series peaks pair with peaks; for a negative
    one demand peaks pair with series valleys.  ``association="auto"`` picks
    the sign of the post-burn-in correlation with the demand.
    """
    if not isinstance(demand, Sinusoidal):
        raise ParameterError("lag analysis needs sinusoidal demand")
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if times.shape != series.shape:
        raise AlignmentError("times and series must have the same length")
    dt = times[1] - times[0]
    period = demand.period
    if times[-1] - burn_in < 2 * period - 1e-9:
        raise ParameterError("series must cover two demand periods after burn-in")
    keep = times > burn_in
    if association == "auto":
        lam = np.array([demand(t) for t in times[keep]])
        association = "positive" if correlation(series[keep], lam) >= 0 else "negative"
    if association not in ("positive", "negative"):
        raise ParameterError(f"unknown association {association!r}")
    # refined times of interior local extrema of the whole series
    mid, left, right = series[1:-1], series[:-2], series[2:]
    found = {
        "max": np.flatnonzero((mid > left) & (mid >= right)) + 1,
        "min": np.flatnonzero((mid < left) & (mid <= right)) + 1,
    }
    refined = {k: np.array([_refine(times, series, i) for i in v]) for k, v in found.items()}
    # parabolic refinement is exact to round-off for an extremum sitting on t_e
    tol = 1e-3 * dt
    report = LagReport(series_k=series_k, mu=mu, association=association)
    for t_e, kind in demand_extrema(demand, burn_in, times[-1] - period - 2 * dt):
        target = kind if association == "positive" else ("min" if kind == "max" else "max")
        cand = refined[target]
        hit = np.flatnonzero((cand >= t_e - tol) & (cand <= t_e + period))
        if hit.size == 0:
            if strict:
                raise NoExtremumError(f"no {target} within a period after demand {kind} at t={t_e:.4g}")
            report.missing.append((t_e, kind))
            continue
        report.entries.append(LagEntry(kind, t_e, float(cand[hit[0]])))
    if not report.entries:
        raise NoExtremumError("no series extremum follows any demand extremum")
    return report


def best_lag(times, series, demand: Sinusoidal, burn_in: float = 5.0, n_lags: int = None):
    """Lag ``l`` on the output grid maximizing corr(series(t), demand(t - l)) over ``[0, period)``."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    dt = times[1] - times[0]
    n_lags = int(demand.period / dt) if n_lags is None else n_lags
    keep = times > burn_in
    lags = dt * np.arange(n_lags)
    corrs = np.array(
        [correlation(series[keep], [demand(t - l) for t in times[keep]]) for l in lags]
    )
    return float(lags[int(np.argmax(corrs))]), lags, corrs
