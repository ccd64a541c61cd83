"""Model functions, wave parameters and the critical-manifold algebra.

The PDE is

    u_t = (eps u_x - chi u phi(v_x))_x,     eps v_t = v_xx + u - g(v),

with ``phi' > 0``, ``phi(0) > 0`` and ``g`` having a unique interior minimum
at ``beta``.  Everything downstream consumes a :class:`ModelSpec` and a
:class:`WaveParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import BracketFailure, ManifoldSingularity, ModelValidationError, NoPulseRegime
from .numerics import bisect, monotone_inverse, polish_ulps

SINGULARITY_GUARD = 1e-8
INVERSE_TOL = 1e-12

Scalar = Callable[[float], float]


@dataclass(frozen=True)
class ModelSpec:
    phi: Scalar
    phi_prime: Scalar
    phi_inverse: Scalar
    g: Scalar
    g_prime: Scalar
    beta: float
    chi: float
    g_at_zero: float
    g_infinity: float
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def g_star(self) -> float:
        return min(self.g_at_zero, self.g_infinity)

    @property
    def phi0(self) -> float:
        return float(self.phi(0.0))

    @property
    def critical_speed(self) -> float:
        """``chi * phi(0)``: the speed separating pulses from fronts."""
        return self.chi * self.phi0


@dataclass(frozen=True)
class WaveParams:
    s: float
    u_minus: float
    epsilon: float
    v_minus: float
    v_plus: float

    def with_speed(self, s: float) -> "WaveParams":
        return replace(self, s=float(s))

    def with_epsilon(self, epsilon: float) -> "WaveParams":
        return replace(self, epsilon=float(epsilon))


# --------------------------------------------------------------------------- families


def _tanh_quadratic(p: Mapping[str, float]) -> dict:
    a, b = p.get("a", 1.0), p.get("b", 1.0)
    c, d, beta = p.get("c", 1.0), p.get("d", 1.0), p.get("beta", 1.0)
    return dict(
        phi=lambda w: a + np.tanh(b * w),
        phi_prime=lambda w: b / np.cosh(b * w) ** 2,
        g=lambda v: c + d * (v - beta) ** 2,
        g_prime=lambda v: 2.0 * d * (v - beta),
        beta=beta,
        g_infinity=math.inf if d > 0 else c,
    )


def _logistic_rational(p: Mapping[str, float]) -> dict:
    L, m = p.get("L", 1.0), p.get("m", 0.5)
    c, d, beta = p.get("c", 1.0), p.get("d", 1.0), p.get("beta", 2.0)
    # bounded degradation: g -> c + d as v -> infinity
    return dict(
        phi=lambda w: L / (1.0 + np.exp(-w)) + m,
        phi_prime=lambda w: L * np.exp(-w) / (1.0 + np.exp(-w)) ** 2,
        g=lambda v: c + d * (v - beta) ** 2 / (1.0 + v * v),
        g_prime=lambda v: 2.0 * d * (v - beta) * (1.0 + beta * v) / (1.0 + v * v) ** 2,
        beta=beta,
        g_infinity=c + d,
    )


FAMILIES: dict[str, Callable[[Mapping[str, float]], dict]] = {
    "tanh-quadratic": _tanh_quadratic,
    "logistic-rational": _logistic_rational,
}


def register_family(name: str, factory: Callable[[Mapping[str, float]], dict]) -> None:
    """Make a custom family available to :func:`build_model` and the config loader.

    ``factory(params)`` must return a dict with keys ``phi, phi_prime, g,
    g_prime, beta, g_infinity``.
    """
    FAMILIES[name] = factory


def _validate(model: ModelSpec, w_probe: np.ndarray, v_probe: np.ndarray) -> None:
    dphi = np.array([model.phi_prime(w) for w in w_probe], dtype=float)
    if not np.all(dphi > 0.0):
        bad = w_probe[np.argmin(dphi)]
        raise ModelValidationError(f"phi' <= 0 at w={bad:.6g} (phi must be strictly increasing)")
    if not model.phi(0.0) > 0.0:
        raise ModelValidationError(f"phi(0) = {model.phi(0.0):.6g} must be positive")
    if not model.beta > 0.0:
        raise ModelValidationError("beta must be positive")
    if not model.chi > 0.0:
        raise ModelValidationError("chi must be positive")

    gp = np.array([model.g_prime(v) for v in v_probe], dtype=float)
    gv = np.array([model.g(v) for v in v_probe], dtype=float)
    away = np.abs(v_probe - model.beta) > 1e-6 * max(1.0, model.beta)
    left = away & (v_probe < model.beta)
    right = away & (v_probe > model.beta)
    if not (np.any(left) and np.any(right)):
        raise ModelValidationError("probe grid does not straddle beta")
    if not (np.all(gp[left] < 0.0) and np.all(gp[right] > 0.0)):
        raise ModelValidationError("g' does not change sign exactly once at beta on the probe grid")
    if not np.all(gv > 0.0):
        raise ModelValidationError("g must be positive")

    # supplied derivatives against central differences
    h = 1e-6
    for fun, der, grid, name in (
        (model.phi, model.phi_prime, w_probe[::10], "phi"),
        (model.g, model.g_prime, v_probe[1::10], "g"),
    ):
        fd = np.array([(fun(x + h) - fun(x - h)) / (2 * h) for x in grid])
        an = np.array([der(x) for x in grid])
        if not np.allclose(fd, an, rtol=1e-5, atol=1e-7):
            raise ModelValidationError(f"{name}_prime disagrees with finite differences of {name}")

    w_check = np.linspace(-3.0, 3.0, 25)
    back = np.array([model.phi_inverse(model.phi(w)) for w in w_check])
    if not np.allclose(back, w_check, atol=1e-8):
        raise ModelValidationError("phi_inverse(phi(w)) != w on the probe grid")


def build_model(family: str, params: Mapping[str, float] | None = None) -> ModelSpec:
    """Instantiate a registered family and validate its structural assumptions."""
    params = dict(params or {})
    if family not in FAMILIES:
        raise ModelValidationError(f"unknown model family {family!r}; known: {sorted(FAMILIES)}")
    chi = float(params.pop("chi", 1.0))
    parts = FAMILIES[family](params)
    phi, phi_prime = parts["phi"], parts["phi_prime"]

    def phi_inverse(y: float) -> float:
        return monotone_inverse(phi, phi_prime, float(y), tol=INVERSE_TOL)

    g = parts["g"]
    model = ModelSpec(
        phi=phi,
        phi_prime=phi_prime,
        phi_inverse=phi_inverse,
        g=g,
        g_prime=parts["g_prime"],
        beta=float(parts["beta"]),
        chi=chi,
        g_at_zero=float(g(0.0)),
        g_infinity=float(parts["g_infinity"]),
        family=family,
        params={**params, "chi": chi},
    )
    _validate(model, np.linspace(-5.0, 5.0, 401), np.linspace(0.0, 4.0 * model.beta, 401))
    return model


# --------------------------------------------------------------------------- states


def resolve_states(model: ModelSpec, u_minus: float, v_max_start: float | None = None) -> tuple[float, float]:
    """Return ``(v_minus, v_plus)``, the two roots of ``g(v) = u_minus`` with ``v_plus < beta < v_minus``."""
    g_beta = model.g(model.beta)
    if not (g_beta < u_minus < model.g_star):
        raise NoPulseRegime(
            f"u_minus={u_minus:.12g} outside the open two-equilibrium window "
            f"({g_beta:.12g}, {model.g_star:.12g})"
        )
    res = lambda v: float(model.g(v)) - u_minus
    v_plus = bisect(res, 0.0, model.beta)

    hi = v_max_start if v_max_start is not None else 2.0 * model.beta
    for _ in range(200):
        if res(hi) > 0.0:
            break
        hi *= 2.0
        if not math.isfinite(hi):
            break
    else:
        hi = math.inf
    if not (math.isfinite(hi) and res(hi) > 0.0):
        raise BracketFailure("could not bracket the right root of g(v) = u_minus")
    v_minus = bisect(res, model.beta, hi)
    return polish_ulps(res, v_minus), polish_ulps(res, v_plus)


def wave_params(model: ModelSpec, u_minus: float, s: float = math.nan, epsilon: float = 0.0) -> WaveParams:
    v_minus, v_plus = resolve_states(model, u_minus)
    return WaveParams(s=float(s), u_minus=float(u_minus), epsilon=float(epsilon),
                      v_minus=v_minus, v_plus=v_plus)


# --------------------------------------------------------------------------- manifold algebra


def _denominator(model: ModelSpec, params: WaveParams, W):
    den = model.chi * model.phi(W) - params.s
    if np.any(np.abs(den) < SINGULARITY_GUARD):
        raise ManifoldSingularity(
            f"|chi phi(W) - s| below {SINGULARITY_GUARD:g} (s={params.s:.6g})"
        )
    return den


def h(model: ModelSpec, params: WaveParams, W):
    """Critical manifold ``U = h(W)``."""
    den = _denominator(model, params, W)
    # ratio first: at W = 0 it is exactly 1, so h(0) == u_minus bit for bit
    return params.u_minus * ((model.critical_speed - params.s) / den)


def h_prime(model: ModelSpec, params: WaveParams, W):
    den = _denominator(model, params, W)
    return -params.u_minus * model.chi * model.phi_prime(W) * (model.critical_speed - params.s) / den**2


def B(model: ModelSpec, params: WaveParams, V):
    """``phi`` of the ``W' = 0`` isocline: the isocline is ``W = phi^{-1}(B(V))``."""
    r = params.s / model.chi
    return r + params.u_minus / model.g(V) * (model.phi0 - r)


def isocline(model: ModelSpec, params: WaveParams, V: float) -> float:
    return model.phi_inverse(B(model, params, V))


def singular_w(model: ModelSpec, params: WaveParams) -> float:
    """Smallest ``W > 0`` with ``chi phi(W) = s`` (``inf`` if the strip is unbounded above)."""
    target = params.s / model.chi
    if target <= model.phi0:
        return 0.0
    try:
        return model.phi_inverse(target)
    except BracketFailure:
        return math.inf
