"""Embedded Dormand-Prince 5(4) stepper with quartic dense output.

Written for small autonomous systems (the traced flows are 3-dimensional:
position, momentum, accumulated action), so the stepper favors simplicity
and per-step dense coefficients over large-system throughput.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Butcher tableau; stage times are omitted because all traced systems are
# autonomous.
_A = (
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Quartic interpolant weights (Shampine); same accuracy order as the solution.
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass(frozen=True)
class Step:
    """One accepted step: dense state y(t0 + theta*h) = y0 + h * Q @ powers(theta)."""

    t0: float
    h: float
    y0: np.ndarray
    y1: np.ndarray
    q: np.ndarray  # (dim, 4)

    def eval(self, t: float) -> np.ndarray:
        theta = (t - self.t0) / self.h
        powers = np.array([theta, theta**2, theta**3, theta**4])
        return self.y0 + self.h * (self.q @ powers)

    def eval_many(self, ts: np.ndarray) -> np.ndarray:
        theta = (ts - self.t0) / self.h
        powers = np.vstack([theta, theta**2, theta**3, theta**4])
        return self.y0[:, None] + self.h * (self.q @ powers)


def _initial_step(f, y0, tol):
    scale = np.linalg.norm(y0) + 1.0
    rate = np.linalg.norm(f(y0)) + 1e-12
    h = 0.01 * scale / rate
    return min(max(h, 1e-8), 0.5)


def dp45_steps(f, y0, tol: float, t_max: float):
    """Yield accepted Step objects from t=0 until t_max.

    tol is used as both absolute and relative local error target per step.
    """
    t = 0.0
    y = np.asarray(y0, dtype=float)
    dim = y.size
    k = np.empty((7, dim))
    k[0] = f(y)
    h = _initial_step(f, y, tol)
    while t < t_max:
        if t + h > t_max:
            h = t_max - t
        for i in range(1, 7):
            k[i] = f(y + h * (_A[i] @ k[:i]))
        y1 = y + h * (_B @ k)
        err_vec = h * (_E @ k)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y1))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            q = k.T @ _P
            step = Step(t, h, y.copy(), y1.copy(), q)
            t += h
            y = y1
            k[0] = k[6]  # FSAL
            yield step
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err ** (-0.2)
            )
            h *= max(_MIN_FACTOR, factor)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
            if h < 1e-14 * max(1.0, abs(t)):
                raise RuntimeError("step size underflow in dp45")


def resample(steps: list[Step], ts: np.ndarray) -> np.ndarray:
    """Evaluate the dense trajectory at sorted times ts; returns (len(ts), dim)."""
    ends = np.array([s.t0 + s.h for s in steps])
    idx = np.searchsorted(ends, ts, side="left")
    idx = np.clip(idx, 0, len(steps) - 1)
    out = np.empty((ts.size, steps[0].y0.size))
    start = 0
    while start < ts.size:
        stop = start
        seg = idx[start]
        while stop < ts.size and idx[stop] == seg:
            stop += 1
        out[start:stop] = steps[seg].eval_many(ts[start:stop]).T
        start = stop
    return out
