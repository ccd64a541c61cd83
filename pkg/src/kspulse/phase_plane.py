"""Equilibria and vector-field structure of the reduced flow on the critical manifold.

The reduced system is ``V' = W, W' = -h(W) + g(V)``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEquilibrium
from .model import ModelSpec, WaveParams, h, h_prime

HYPERBOLICITY_TOL = 1e-8


@dataclass(frozen=True)
class ReducedState:
    v: float
    w: float


@dataclass(frozen=True)
class EquilibriumInfo:
    v: float
    eigenvalues: tuple[complex, complex]
    eigenvectors: tuple[np.ndarray, np.ndarray]
    classification: str

    @property
    def is_saddle(self) -> bool:
        return self.classification == "saddle"

    def as_dict(self) -> dict:
        return {
            "v": self.v,
            "w": 0.0,
            "classification": self.classification,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
        }


def reduced_vector_field(model: ModelSpec, params: WaveParams, state: ReducedState) -> tuple[float, float]:
    return state.w, float(-h(model, params, state.w) + model.g(state.v))


def reduced_rhs(model: ModelSpec, params: WaveParams):
    """Array form ``y = (V, W) -> (V', W')`` used by the integrators."""

    def f(y: np.ndarray) -> np.ndarray:
        V, W = y
        return np.array([W, -h(model, params, W) + model.g(V)])

    return f


def linearization(model: ModelSpec, params: WaveParams, v: float) -> np.ndarray:
    """Jacobian ``A(E) = [[0, 1], [g'(v), -h'(0)]]`` at an equilibrium ``(v, 0)``."""
    return np.array([[0.0, 1.0], [float(model.g_prime(v)), -float(h_prime(model, params, 0.0))]])


def _equilibrium(model: ModelSpec, params: WaveParams, v: float) -> EquilibriumInfo:
    gp = float(model.g_prime(v))
    if abs(gp) < HYPERBOLICITY_TOL:
        raise DegenerateEquilibrium(f"|g'({v:.6g})| = {abs(gp):.3g} below {HYPERBOLICITY_TOL:g}")
    hp = float(h_prime(model, params, 0.0))
    disc = hp * hp + 4.0 * gp
    root = cmath.sqrt(disc)
    lam1 = (-hp + root) / 2.0
    lam2 = (-hp - root) / 2.0
    if disc >= 0.0:
        lam1, lam2 = complex(lam1.real, 0.0), complex(lam2.real, 0.0)
    if gp > 0.0:
        kind = "saddle"
    else:
        # trace -h'(0) < 0 whenever s > chi phi(0); the mirrored branch repels
        kind = ("stable-" if hp > 0.0 else "unstable-") + ("node" if disc >= 0.0 else "focus")
    vecs = tuple(np.array([1.0, lam]) if disc < 0.0 else np.array([1.0, lam.real]) for lam in (lam1, lam2))
    return EquilibriumInfo(v=float(v), eigenvalues=(lam1, lam2), eigenvectors=vecs, classification=kind)


def classify_equilibria(model: ModelSpec, params: WaveParams) -> list[EquilibriumInfo]:
    """``[E+, E-]``: the attractor at ``v_plus`` then the saddle at ``v_minus``."""
    return [_equilibrium(model, params, params.v_plus), _equilibrium(model, params, params.v_minus)]


def transversal_eigenvalue(model: ModelSpec, params: WaveParams, U: float) -> float:
    """Rate of the fast fibre through ``U`` on the critical manifold (negative = attracting)."""
    return params.u_minus / U * (model.critical_speed - params.s)


def divergence(model: ModelSpec, params: WaveParams, state: ReducedState) -> float:
    return float(-h_prime(model, params, state.w))
