"""Independent reference expressions shared by the unit and acceptance tests."""

import math

import numpy as np

from bikeshare.model import ModelParams, Stationary, UtilizationClass


def random_state(rng, capacity, n_classes=1, spare=None):
    """Random admissible (classes, K+1) measure and a fleet ratio keeping gamma_tilde >= 0."""
    w = rng.dirichlet(np.ones(n_classes))
    y = np.array([wc * rng.dirichlet(np.ones(capacity + 1)) for wc in w])
    mean = float(y.sum(0) @ np.arange(capacity + 1))
    gamma = mean + (rng.uniform(0, 2) if spare is None else spare)
    return y, w, gamma


def params_for(capacity, gamma, weights=(1.0,), rs=None, demand=None, mu=1.0, n=10**6):
    rs = [1.0] + list(np.linspace(0.9, 0.3, len(weights) - 1)) if rs is None else rs
    return ModelParams(
        n_stations=n,
        fleet_size=math.ceil(gamma * n - 1e-9),
        capacity=capacity,
        demand=demand or Stationary(1.0),
        travel_rate=mu,
        classes=tuple(UtilizationClass(r, w) for r, w in zip(rs, weights)),
    )


def hand_A(y, L, g):
    """K=3 drift derivative written out entry by entry (unit travel rate)."""
    y0, y1, y2, _ = y
    return np.array(
        [
            [-g, y0 + L, 2 * y0, 3 * y0],
            [g, y1 - y0 - g - L, 2 * (y1 - y0) + L, 3 * (y1 - y0)],
            [0.0, y2 - y1 + g, 2 * (y2 - y1) - g - L, 3 * (y2 - y1) + L],
            [0.0, -y2, -2 * y2 + g, -3 * y2 - L],
        ]
    )


def hand_B(y, L, g):
    B = np.zeros((4, 4))
    for i in range(4):
        B[i, i] = L * ((y[i + 1] if i < 3 else 0) + (y[i] if i > 0 else 0)) + g * (
            (y[i] if i < 3 else 0) + (y[i - 1] if i > 0 else 0)
        )
    for i in range(3):
        B[i, i + 1] = B[i + 1, i] = -L * y[i + 1] - g * y[i]
    return B
