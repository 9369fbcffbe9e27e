"""Model parameters and the analytic objects of the large-system limits.

Stations are grouped into utilization classes ``c`` with relative utilization
``r_c`` and mass ``w_c``.  A station of class ``c`` loses bikes at rate
``Lambda(t) / r_c`` while it is non-empty, and receives returning riders at
rate ``mu * gamma_tilde`` while it is not full, where ``gamma_tilde`` is the
number of circulating bikes per station.

State vectors are numpy arrays of shape ``(C, K + 1)`` holding the mass of
stations in class ``c`` with ``k`` bikes.  The Jacobian and the noise matrix
work on the aggregated occupancy vector ``y(k) = sum_c y(c, k)`` with the
class-averaged retrieval intensity, which is exact when occupancy and class
are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ParameterError

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Stationary:
    """Constant arrival rate of the least-utilized (r = 1) stations."""

    rate: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ParameterError(f"stationary rate must be positive, got {self.rate}")

    def __call__(self, t: float) -> float:
        return self.rate

    @property
    def upper_bound(self) -> float:
        return self.rate

    is_stationary = True


@dataclass(frozen=True)
class Sinusoidal:
    """Periodic arrival rate ``base * (1 + amplitude * sin(omega * t + phase))``."""

    base: float = 1.0
    amplitude: float = 0.5
    angular_frequency: float = 0.5
    phase: float = 0.0

    def __post_init__(self):
        if not self.base > 0:
            raise ParameterError(f"sinusoidal base must be positive, got {self.base}")
        if not 0 <= self.amplitude < 1:
            raise ParameterError(
                f"amplitude must lie in [0, 1) so rates stay positive, got {self.amplitude}"
            )
        if not self.angular_frequency > 0:
            raise ParameterError("angular_frequency must be positive")

    def __call__(self, t: float) -> float:
        return self.base * (1.0 + self.amplitude * math.sin(self.angular_frequency * t + self.phase))

    @property
    def upper_bound(self) -> float:
        return self.base * (1.0 + self.amplitude)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.angular_frequency

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the rate over ``[a, b]``."""
        w, ph = self.angular_frequency, self.phase
        return self.base * (
            (b - a) - self.amplitude / w * (math.cos(w * b + ph) - math.cos(w * a + ph))
        )

    is_stationary = False


Demand = Union[Stationary, Sinusoidal]


@dataclass(frozen=True)
class UtilizationClass:
    r: float
    weight: float


def _default_classes():
    return (UtilizationClass(1.0, 1.0),)


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the bike-sharing network.

    ``n_stations`` (N), ``fleet_size`` (M) and ``capacity`` (K) are the
    finite-system sizes; ``gamma = M / N`` is the bikes-per-station ratio used
    by the limit equations.  ``demand(t)`` is the arrival rate at r = 1
    stations (the limiting minimum rate Lambda).
    """

    n_stations: int
    fleet_size: int
    capacity: int
    demand: Demand = field(default_factory=Stationary)
    travel_rate: float = 1.0
    classes: tuple = field(default_factory=_default_classes)

    def __post_init__(self):
        if int(self.n_stations) != self.n_stations or self.n_stations < 1:
            raise ParameterError(f"n_stations must be a positive integer, got {self.n_stations}")
        if int(self.fleet_size) != self.fleet_size or self.fleet_size < 0:
            raise ParameterError(f"fleet_size must be a non-negative integer, got {self.fleet_size}")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ParameterError(f"capacity must be an integer >= 1, got {self.capacity}")
        if not (self.travel_rate > 0 and math.isfinite(self.travel_rate)):
            raise ParameterError(f"travel_rate must be positive, got {self.travel_rate}")
        classes = tuple(
            c if isinstance(c, UtilizationClass) else UtilizationClass(*c) for c in self.classes
        )
        object.__setattr__(self, "classes", classes)
        if not classes:
            raise ParameterError("at least one utilization class is required")
        rs = [c.r for c in classes]
        ws = [c.weight for c in classes]
        if any(not (0 < r <= 1) for r in rs):
            raise ParameterError(f"relative utilizations must lie in (0, 1], got {rs}")
        if max(rs) != 1.0:
            raise ParameterError(f"the largest relative utilization must equal 1, got {max(rs)}")
        if any(w < 0 for w in ws):
            raise ParameterError(f"class weights must be non-negative, got {ws}")
        if abs(math.fsum(ws) - 1.0) > MASS_TOL:
            raise ParameterError(f"class weights must sum to 1, got {math.fsum(ws)}")

    @property
    def gamma(self) -> float:
        return self.fleet_size / self.n_stations

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def r(self) -> np.ndarray:
        return np.array([c.r for c in self.classes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.classes])

    @property
    def shape(self) -> tuple:
        return (self.n_classes, self.capacity + 1)

    def class_rates(self, t: float = 0.0) -> np.ndarray:
        """Per-station retrieval rate ``Lambda(t) / r_c`` for every class."""
        return self.demand(t) / self.r

    def lambda_tilde(self, t: float = 0.0) -> float:
        return float(np.dot(self.weights, self.class_rates(t)))

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedRates:
    gamma_tilde: float
    lambda_tilde: float
    class_rates: np.ndarray


class EmpiricalMeasure:
    """Occupancy distribution ``y(c, k)`` over utilization classes and bike counts."""

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.array(values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2:
            raise ParameterError(f"empirical measure must be 1-D or 2-D, got shape {v.shape}")
        self.values = v

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"EmpiricalMeasure({self.values.tolist()!r})"

    def __eq__(self, other):
        return isinstance(other, EmpiricalMeasure) and np.array_equal(self.values, other.values)

    @property
    def aggregate(self) -> np.ndarray:
        return self.values.sum(axis=0)

    @property
    def capacity(self) -> int:
        return self.values.shape[1] - 1

    def mean_occupancy(self) -> float:
        return float(self.aggregate @ np.arange(self.capacity + 1))

    @classmethod
    def from_counts(cls, counts, n_stations: int) -> "EmpiricalMeasure":
        return cls(np.asarray(counts, dtype=float) / n_stations)

    @classmethod
    def from_aggregate(cls, y, weights=(1.0,)) -> "EmpiricalMeasure":
        """Spread an aggregated occupancy vector over classes in proportion to their weights."""
        return cls(np.outer(np.asarray(weights, dtype=float), np.asarray(y, dtype=float)))

    def validate(self, params: ModelParams | None = None, tol: float = MASS_TOL) -> "EmpiricalMeasure":
        v = self.values
        if np.any(v < -tol):
            raise ParameterError(f"empirical measure has negative mass: min {v.min()}")
        if abs(v.sum() - 1.0) > tol:
            raise ParameterError(f"empirical measure must sum to 1, got {v.sum()!r}")
        if params is not None:
            if v.shape != params.shape:
                raise ParameterError(f"measure shape {v.shape} does not match model {params.shape}")
            if np.any(np.abs(v.sum(axis=1) - params.weights) > tol):
                raise ParameterError("class masses do not match the utilization weights")
            docked = float(v.sum(axis=0) @ np.arange(v.shape[-1]))
            if docked > params.gamma + 1e-9:
                raise ParameterError(
                    f"mean occupancy {docked} exceeds bikes per station {params.gamma}"
                )
        return self


def _classwise(y, params: ModelParams) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        if params.n_classes != 1:
            return np.outer(params.weights, y)
        y = y[None, :]
    return y


def _aggregated(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y.sum(axis=0) if y.ndim == 2 else y


def gamma_tilde(y, params: ModelParams) -> float:
    agg = _aggregated(y)
    return params.gamma - float(agg @ np.arange(agg.size))


def derived_rates(y, params: ModelParams, t: float = 0.0) -> DerivedRates:
    return DerivedRates(
        gamma_tilde=gamma_tilde(y, params),
        lambda_tilde=params.lambda_tilde(t),
        class_rates=params.class_rates(t),
    )


def drift(y, params: ModelParams, t: float = 0.0) -> np.ndarray:
    """Mean-field vector field, same shape as the classwise state ``(C, K + 1)``."""
    y = _classwise(y, params)
    ret = params.travel_rate * gamma_tilde(y, params)
    down = params.class_rates(t)[:, None] * y
    up = ret * y
    out = np.zeros_like(y)
    # retrieval k -> k-1 (k > 0), return k -> k+1 (k < K)
    out[:, 1:] -= down[:, 1:]
    out[:, :-1] += down[:, 1:]
    out[:, :-1] -= up[:, :-1]
    out[:, 1:] += up[:, :-1]
    return out


def aggregate_drift(y, params: ModelParams, t: float = 0.0) -> np.ndarray:
    """Drift on the aggregated occupancy vector using the class-averaged retrieval rate.

    Coincides with ``drift(...).sum(0)`` for a single class; the Jacobian below
    is the exact derivative of this map on unconstrained ``R^(K+1)``.
    """
    y = _aggregated(y)
    lam = params.lambda_tilde(t)
    ret = params.travel_rate * (params.gamma - float(y @ np.arange(y.size)))
    out = np.zeros_like(y)
    out[1:] -= lam * y[1:]
    out[:-1] += lam * y[1:]
    out[:-1] -= ret * y[:-1]
    out[1:] += ret * y[:-1]
    return out


def jacobian(y, params: ModelParams, t: float = 0.0) -> np.ndarray:
    """Derivative matrix ``A[k, j] = d b(k) / d y(j)`` of the aggregated drift."""
    y = _aggregated(y)
    K = y.size - 1
    lam = params.lambda_tilde(t)
    mu = params.travel_rate
    gt = mu * (params.gamma - float(y @ np.arange(K + 1)))
    j = np.arange(K + 1, dtype=float)
    A = np.zeros((K + 1, K + 1))
    # circulation term: d(gamma_tilde)/dy(j) = -j
    A[0] = mu * j * y[0]
    A[1:K] = mu * np.outer(y[1:K] - y[0 : K - 1], j)
    A[K] = -mu * j * y[K - 1]
    idx = np.arange(K + 1)
    A[idx, idx] -= lam * (idx > 0) + gt * (idx < K)
    A[idx[:-1], idx[:-1] + 1] += lam
    A[idx[1:], idx[1:] - 1] += gt
    return A


def noise_rate(y, params: ModelParams, t: float = 0.0) -> np.ndarray:
    """Time derivative of the martingale brackets: symmetric tridiagonal, zero row sums."""
    y = _aggregated(y)
    K = y.size - 1
    lam = params.lambda_tilde(t)
    gt = params.travel_rate * (params.gamma - float(y @ np.arange(K + 1)))
    # flux across each edge k <-> k+1
    edge = lam * y[1:] + gt * y[:-1]
    B = np.zeros((K + 1, K + 1))
    idx = np.arange(K)
    B[idx, idx + 1] = -edge
    B[idx + 1, idx] = -edge
    diag = np.zeros(K + 1)
    diag[:-1] += edge
    diag[1:] += edge
    B[np.arange(K + 1), np.arange(K + 1)] = diag
    return B


def utilization_from_rates(rates: Sequence[float], decimals: int = 12):
    """Group stations by relative utilization ``min(rates) / rate``.

    Assumes uniform routing (P_i = 1/N).  Returns ``(classes, Lambda)`` with
    classes sorted by decreasing ``r`` and weights equal to station fractions.
    """
    lam = np.asarray(rates, dtype=float)
    if lam.size == 0:
        raise ParameterError("at least one station rate is required")
    if np.any(~(lam > 0)):
        raise ParameterError(f"station arrival rates must be positive, got {lam.tolist()}")
    low = lam.min()
    r = np.round(low / lam, decimals)
    values, counts = np.unique(r, return_counts=True)
    classes = tuple(
        UtilizationClass(float(v), float(c) / lam.size) for v, c in zip(values[::-1], counts[::-1])
    )
    return classes, float(low)
