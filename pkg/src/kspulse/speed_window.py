"""Admissible traveling-speed window and the free constants of the trapping region."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConstantsInfeasible, EmptyWindow, ModelValidationError
from .model import ModelSpec, WaveParams, isocline, singular_w, wave_params
from .numerics import adaptive_simpson, inf_on_interval, scan_then_refine_max
from .phase_plane import classify_equilibria

QUAD_RTOL = 1e-10
QUAD_ATOL = 1e-14


@dataclass(frozen=True)
class SpeedWindow:
    s_lower: float
    s_upper: float
    s1: float
    s2: float
    J_mean: float
    Q_mean: float
    branch: str

    @property
    def is_empty(self) -> bool:
        return not self.s_upper > self.s_lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.s_lower + self.s_upper)

    def interior_speeds(self, n: int) -> np.ndarray:
        """``n`` speeds strictly inside the window (cell midpoints)."""
        return self.s_lower + (np.arange(n) + 0.5) / n * (self.s_upper - self.s_lower)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrapConstants:
    v_star_low: float
    v_star_high: float
    w_low: float
    w_high: float

    def as_dict(self) -> dict:
        return asdict(self)


def J(model: ModelSpec, params: WaveParams, V: float) -> float:
    return V * (float(model.g(V)) - params.u_minus)


def Q(model: ModelSpec, params: WaveParams, V: float) -> float:
    v_minus = params.v_minus
    inf_gp = inf_on_interval(lambda z: float(model.g_prime(z)), V, v_minus)
    return (v_minus - V) ** 2 * inf_gp


def integral_J_mean(model: ModelSpec, params: WaveParams) -> float:
    val, _ = adaptive_simpson(lambda V: J(model, params, V), 0.0, params.v_plus, QUAD_RTOL, QUAD_ATOL)
    return val / params.v_plus


def integral_Q_mean(model: ModelSpec, params: WaveParams) -> float:
    def integrand(V: float) -> float:
        q = Q(model, params, V)
        if q < -1e-14:
            raise ModelValidationError(f"inf g' < 0 on ({V:.6g}, v_minus]: g is not increasing right of beta")
        return q

    val, _ = adaptive_simpson(integrand, model.beta, params.v_minus, QUAD_RTOL, QUAD_ATOL)
    return val / (params.v_minus - model.beta)


def speed_bounds(model: ModelSpec, u_minus: float, branch: str = "above") -> SpeedWindow:
    """Sufficient speed window for a pulse through ``u_minus``.

    ``branch="above"`` gives ``(chi phi(0), min(s1, s2))``; ``"below"`` the
    mirrored window ``(max(s1, s2), chi phi(0))``.  An empty window is returned,
    not raised; use :func:`require_window` to turn emptiness into an error.
    """
    if branch not in ("above", "below"):
        raise ValueError(f"branch must be 'above' or 'below', got {branch!r}")
    params = wave_params(model, u_minus)
    jm = integral_J_mean(model, params)
    qm = integral_Q_mean(model, params)
    g_beta = float(model.g(model.beta))
    g0 = model.g_at_zero
    chi, phi, phi0 = model.chi, model.phi, model.phi0
    sign = 1.0 if branch == "above" else -1.0
    s1 = chi / (1.0 - u_minus / g_beta) * (float(phi(-sign * math.sqrt(jm))) - u_minus * phi0 / g_beta)
    s2 = chi / (1.0 - u_minus / g0) * (float(phi(sign * math.sqrt(qm))) - u_minus * phi0 / g0)
    if branch == "above":
        lo, hi = model.critical_speed, min(s1, s2)
    else:
        lo, hi = max(s1, s2), model.critical_speed
    return SpeedWindow(s_lower=lo, s_upper=hi, s1=s1, s2=s2, J_mean=jm, Q_mean=qm, branch=branch)


def require_window(window: SpeedWindow) -> SpeedWindow:
    if window.is_empty:
        raise EmptyWindow(f"speed window ({window.s_lower:.12g}, {window.s_upper:.12g}) is empty")
    return window


def pick_trap_constants(model: ModelSpec, params: WaveParams, margin: float = 0.5) -> TrapConstants:
    """Choose ``v_*, v^*, w_*, w^*`` for the trapping region at speed ``params.s``.

    ``v_*`` and ``v^*`` maximise ``J`` and ``Q``; ``w_*`` and ``w^*`` are convex
    combinations of the isocline heights with the radical bounds.  ``w^*`` is
    additionally kept below the height where ``chi phi(W) = s`` so the
    critical manifold stays regular on the whole region.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    vs_low, j_max = scan_then_refine_max(lambda V: J(model, params, V), 0.0, params.v_plus)
    vs_high, q_max = scan_then_refine_max(lambda V: Q(model, params, V), model.beta, params.v_minus)
    iso_beta = isocline(model, params, model.beta)
    iso_zero = isocline(model, params, 0.0)
    lower_cap = -math.sqrt(max(j_max, 0.0))
    upper_cap = min(math.sqrt(max(q_max, 0.0)), singular_w(model, params))
    w_low = (1.0 - margin) * iso_beta + margin * lower_cap
    w_high = (1.0 - margin) * iso_zero + margin * upper_cap

    ok_low = 0.0 < vs_low < params.v_plus and -math.sqrt(j_max) < w_low < iso_beta < 0.0
    ok_high = (
        model.beta < vs_high < params.v_minus
        and 0.0 < iso_zero < w_high < math.sqrt(q_max)
        and w_high < singular_w(model, params)
    )
    if not (ok_low and ok_high):
        raise ConstantsInfeasible(
            f"trap constants infeasible at s={params.s:.12g}: "
            f"-sqrt(J)={-math.sqrt(max(j_max, 0)):.6g}, w_low={w_low:.6g}, iso(beta)={iso_beta:.6g}; "
            f"iso(0)={iso_zero:.6g}, w_high={w_high:.6g}, sqrt(Q)={math.sqrt(max(q_max, 0)):.6g}"
        )
    return TrapConstants(v_star_low=vs_low, v_star_high=vs_high, w_low=w_low, w_high=w_high)


def saddle_rate_bound(model: ModelSpec, params: WaveParams, constants: TrapConstants) -> tuple[float, float, bool]:
    """Stable eigenvalue of the saddle against the slope of the slanted boundary."""
    saddle = classify_equilibria(model, params)[1]
    lam2 = saddle.eigenvalues[1].real
    bound = -constants.w_high / (params.v_minus - constants.v_star_high)
    return lam2, bound, bool(lam2 < bound < 0.0)
