"""Fixed-step integration of the mean-field and diffusion moment equations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, IntegrationError, ParameterError
from .model import EmpiricalMeasure, ModelParams, drift, jacobian, noise_rate

DEFAULT_STEP = 0.01
DEFAULT_DT = 0.1
NEG_TOL = 1e-9


@dataclass
class Trajectory:
    """States on a uniform output grid.

    ``states`` has shape ``(G + 1, C, K + 1)`` for empirical measures; the
    generic integrator also produces trajectories of flat vectors.
    """

    times: np.ndarray
    states: np.ndarray
    step: float = DEFAULT_STEP
    retrieval_times: Optional[np.ndarray] = None

    def __len__(self):
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def aggregate(self) -> np.ndarray:
        """Occupancy ``y_t(k)`` summed over classes, shape ``(G + 1, K + 1)``."""
        return self.states.sum(axis=1) if self.states.ndim == 3 else self.states

    def measure(self, i: int) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.states[i])

    def at(self, t: float) -> np.ndarray:
        i = int(round((t - self.times[0]) / self.dt)) if self.dt else 0
        if not np.isclose(self.times[i], t, rtol=0, atol=1e-9):
            raise ParameterError(f"time {t} is not on the output grid")
        return self.states[i]


@dataclass
class CovarianceState:
    mean: np.ndarray
    cov: np.ndarray


def _grid(horizon: float, step: float, dt: float):
    if not step > 0:
        raise ParameterError(f"step must be positive, got {step}")
    if horizon < 0:
        raise ParameterError(f"horizon must be non-negative, got {horizon}")
    dt = step if dt is None else dt
    sub = int(round(dt / step))
    if sub < 1 or abs(sub * step - dt) > 1e-9 * max(1.0, dt):
        raise ParameterError(f"output spacing {dt} must be a multiple of the step {step}")
    n_out = int(round(horizon / dt))
    if abs(n_out * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ParameterError(f"horizon {horizon} must be a multiple of the output spacing {dt}")
    return sub, n_out, dt


def rk4_step(field: Callable, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = field(t, x)
    k2 = field(t + h / 2, x + h / 2 * k1)
    k3 = field(t + h / 2, x + h / 2 * k2)
    k4 = field(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    field: Callable[[float, np.ndarray], np.ndarray],
    x0,
    horizon: float,
    step: float = DEFAULT_STEP,
    dt: Optional[float] = None,
    t0: float = 0.0,
    guard: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    post_step: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Trajectory:
    """Classical RK4 with fixed step ``step``; records every ``dt``.

    ``guard(x)`` selects the components that must stay non-negative; values
    below ``-1e-9`` raise :class:`IntegrationError`.  ``post_step`` may
    project the state after each step (e.g. symmetrize a matrix block).
    """
    sub, n_out, dt = _grid(horizon, step, dt)
    x = np.array(x0, dtype=float)
    times = t0 + dt * np.arange(n_out + 1)
    out = np.empty((n_out + 1,) + x.shape)
    out[0] = x
    t = t0
    for i in range(1, n_out + 1):
        for s in range(sub):
            x = rk4_step(field, t, x, step)
            if post_step is not None:
                x = post_step(x)
            t = times[i - 1] + (s + 1) * step
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t={times[i]}")
        if guard is not None:
            low = np.min(guard(x))
            if low < -NEG_TOL:
                raise IntegrationError(f"state mass went negative ({low:.3g}) at t={times[i]}")
        out[i] = x
    return Trajectory(times=times, states=out, step=step)


def _mean_field_field(params: ModelParams):
    def field(t, y):
        return drift(y, params, t)

    return field


def solve_mean_field(
    params: ModelParams,
    y0,
    horizon: float,
    step: float = DEFAULT_STEP,
    dt: float = DEFAULT_DT,
) -> Trajectory:
    y0 = EmpiricalMeasure(np.asarray(y0, dtype=float)).validate(params).values
    return integrate(_mean_field_field(params), y0, horizon, step, dt, guard=lambda x: x)


def solve_covariance(
    params: ModelParams,
    mf: Trajectory,
    sigma0=None,
    mean0=None,
    noise: bool = True,
) -> list:
    """Propagate ``E[D_t]`` and ``Sigma(t)`` along a mean-field solution.

    The mean field is re-integrated jointly with the moments using the same
    step, so the Jacobian and noise matrix are evaluated at the RK4 stage
    points rather than interpolated from the output grid.  ``noise=False``
    drops the bracket term (used for testing).
    """
    shape = mf.states.shape[1:]
    n = shape[-1]
    nc = int(np.prod(shape))
    sigma0 = np.zeros((n, n)) if sigma0 is None else np.asarray(sigma0, dtype=float)
    mean0 = np.zeros(n) if mean0 is None else np.asarray(mean0, dtype=float)
    if sigma0.shape != (n, n) or not np.allclose(sigma0, sigma0.T, atol=1e-10):
        raise ParameterError("initial covariance must be a symmetric (K+1)x(K+1) matrix")

    def field(t, x):
        y = x[:nc].reshape(shape)
        m = x[nc : nc + n]
        S = x[nc + n :].reshape(n, n)
        A = jacobian(y, params, t)
        dS = A @ S + S @ A.T
        if noise:
            dS = dS + noise_rate(y, params, t)
        return np.concatenate([drift(y, params, t).ravel(), A @ m, dS.ravel()])

    def symmetrize(x):
        S = x[nc + n :].reshape(n, n)
        x[nc + n :] = (0.5 * (S + S.T)).ravel()
        return x

    x0 = np.concatenate([mf.states[0].ravel(), mean0, sigma0.ravel()])
    horizon = float(mf.times[-1] - mf.times[0])
    traj = integrate(
        field, x0, horizon, mf.step, mf.dt or mf.step, t0=float(mf.times[0]),
        guard=lambda x: x[:nc], post_step=symmetrize,
    )
    if not np.allclose(traj.states[:, :nc].reshape(mf.states.shape), mf.states, atol=1e-10):
        raise ParameterError("mean-field trajectory was not produced with these parameters")
    return [
        CovarianceState(mean=x[nc : nc + n].copy(), cov=x[nc + n :].reshape(n, n).copy())
        for x in traj.states
    ]


def equilibrium(
    params: ModelParams,
    y0=None,
    tol: float = 1e-10,
    step: float = DEFAULT_STEP,
    chunk: float = 10.0,
    max_horizon: float = 1e4,
) -> EmpiricalMeasure:
    """Run the mean-field ODE forward until the drift vanishes."""
    if not params.demand.is_stationary:
        raise ParameterError("equilibrium requires stationary demand")
    if y0 is None:
        # all stations empty is always admissible
        y0 = np.zeros(params.shape)
        y0[:, 0] = params.weights
    y = EmpiricalMeasure(np.asarray(y0, dtype=float)).validate(params).values
    field = _mean_field_field(params)
    elapsed = 0.0
    while True:
        if np.max(np.abs(drift(y, params))) <= tol:
            return EmpiricalMeasure(y)
        if elapsed >= max_horizon:
            raise ConvergenceError(
                f"drift still {np.max(np.abs(drift(y, params))):.3g} after t={elapsed}"
            )
        y = integrate(field, y, chunk, step, chunk, guard=lambda x: x).states[-1]
        elapsed += chunk
