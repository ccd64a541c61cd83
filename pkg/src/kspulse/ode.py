"""Dormand-Prince 5(4) integrator with an optional integrating-factor treatment.

When ``linear`` is supplied the right-hand side is split per step as
``f(y) = L (y - y*) + N(y)`` with a diagonal ``L`` and shift ``y*`` frozen
at the step start; the ``L`` part is propagated exactly (Lawson's
construction), so a stiff, scalar, analytically known fast direction does
not restrict the step size.  Without ``linear`` the scheme is plain DOPRI5.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import StepUnderflow

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
        [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
)
B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

Rhs = Callable[[np.ndarray], np.ndarray]
Linear = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
Monitor = Callable[[float, np.ndarray], Optional[str]]


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 1.0
    max_length: float = 1e4
    event_tol: float = 1e-6
    first_step: float | None = None
    min_step: float = 1e-12
    max_steps: int = 2_000_000


@dataclass
class Trajectory:
    xi: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    status: str


def dopri_step(f: Rhs, y: np.ndarray, h: float, linear: Linear | None = None):
    """One step; returns ``(y_new, error_vector)``."""
    n = y.size
    if linear is None:
        Ld = np.zeros(n)
        shift = np.zeros(n)
    else:
        Ld, shift = linear(y)
    z = y - shift
    # exp((c_i - c_j) h L) for every stage pair, plus the final propagation factors
    E = np.exp(np.outer(C, Ld) * h)  # row i: exp(c_i h L)
    Einv = np.exp(-np.outer(C, Ld) * h)
    K = np.empty((7, n))
    for i in range(7):
        Zi = E[i] * z
        if i:
            Zi = Zi + h * (A[i, :i, None] * (E[i] * Einv[:i]) * K[:i]).sum(axis=0)
        Yi = Zi + shift
        K[i] = f(Yi) - Ld * (Yi - shift)
    E1 = np.exp(h * Ld)
    prop = E1 * Einv  # exp((1 - c_j) h L)
    z5 = E1 * z + h * (B5[:, None] * prop * K).sum(axis=0)
    z4 = E1 * z + h * (B4[:, None] * prop * K).sum(axis=0)
    return z5 + shift, z5 - z4


def integrate_fixed(f: Rhs, y0, h: float, n_steps: int, linear: Linear | None = None) -> np.ndarray:
    y = np.asarray(y0, dtype=float).copy()
    for _ in range(n_steps):
        y, _ = dopri_step(f, y, h, linear)
    return y


def integrate(
    f: Rhs,
    y0,
    config: IntegratorConfig,
    linear: Linear | None = None,
    monitor: Monitor | None = None,
) -> Trajectory:
    """Adaptive integration from ``xi = 0`` until ``monitor`` returns a status or the length cap.

    ``monitor(xi, y)`` is consulted on the initial point and after every
    accepted step; a non-None return value stops the run with that status.
    """
    y = np.asarray(y0, dtype=float).copy()
    xi = 0.0
    xs, ys, fs = [xi], [y.copy()], [f(y)]
    if monitor is not None:
        status = monitor(xi, y)
        if status is not None:
            return Trajectory(np.array(xs), np.array(ys), np.array(fs), status)

    h = config.first_step or min(config.max_step, 1e-3)
    status = "length-exhausted"
    for _ in range(config.max_steps):
        if xi >= config.max_length:
            break
        h = min(h, config.max_step, config.max_length - xi)
        with np.errstate(over="ignore", invalid="ignore"):  # non-finite trials are rejected below
            y_new, err = dopri_step(f, y, h, linear)
        scale = config.atol + config.rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.all(np.isfinite(y_new)):
            en = np.inf
        if en <= 1.0:
            xi += h
            y = y_new
            xs.append(xi)
            ys.append(y.copy())
            fs.append(f(y))
            fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            h *= fac
            if monitor is not None:
                status = monitor(xi, y)
                if status is not None:
                    break
        else:
            h *= max(0.2, 0.9 * en ** -0.2) if np.isfinite(en) else 0.2
            if h < config.min_step:
                raise StepUnderflow(f"step size underflow at xi={xi:.6g}", xi)
    else:
        status = "step-budget-exhausted"
    return Trajectory(np.array(xs), np.array(ys), np.array(fs), status)
