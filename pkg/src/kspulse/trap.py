"""Trapping region for the reduced flow and sampled inward-flux certification."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GeometryMismatch
from .model import ModelSpec, WaveParams, h
from .speed_window import TrapConstants, saddle_rate_bound

EVAL_TOL = 1e-12
CLOSURE_TOL = 1e-12


@dataclass(frozen=True)
class Curve:
    name: str
    t0: float
    t1: float
    point: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    normal: tuple[float, float]

    def at(self, t) -> np.ndarray:
        V, W = self.point(np.asarray(t, dtype=float))
        return np.array([V, W], dtype=float)


@dataclass(frozen=True)
class TrapRegion:
    constants: TrapConstants
    curves: tuple[Curve, ...]
    v_minus: float
    beta: float

    def curve(self, name: str) -> Curve:
        for c in self.curves:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def vertices(self) -> np.ndarray:
        """Polygon corners in traversal order, starting at the origin."""
        return np.array([c.at(c.t0 if c.name not in _REVERSED else c.t1) for c in _ordered(self)])

    def contains(self, point, tol: float = 1e-12) -> bool:
        """Closed-region membership (boundary points count as inside)."""
        p = np.asarray(point, dtype=float)
        verts = self.vertices
        if _distance_to_polygon(p, verts) <= tol:
            return True
        return _winding_number(p, verts) != 0


# traversal origin -> G1 -> G2 -> G3 -> E- -> G4 -> connector -> G5 -> G6 -> origin.
# G4, connector, G5 and G6 are parameterised against the traversal direction.
_ORDER = ("gamma1", "gamma2", "gamma3", "gamma4", "connector", "gamma5", "gamma6")
_REVERSED = {"gamma4", "connector", "gamma5", "gamma6"}


def _ordered(trap: TrapRegion):
    return [trap.curve(n) for n in _ORDER]


def _winding_number(p: np.ndarray, verts: np.ndarray) -> int:
    wn = 0
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
        if a[1] <= p[1]:
            if b[1] > p[1] and cross > 0:
                wn += 1
        elif b[1] <= p[1] and cross < 0:
            wn -= 1
    return wn


def _distance_to_polygon(p: np.ndarray, verts: np.ndarray) -> float:
    best = np.inf
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        best = min(best, float(np.hypot(*(a + t * ab - p))))
    return best


def build_trap(model: ModelSpec, params: WaveParams, constants: TrapConstants) -> TrapRegion:
    """Six boundary curves plus the horizontal connector ``W = w^*`` on ``[beta, v^*]``."""
    vs, vS = constants.v_star_low, constants.v_star_high
    ws, wS = constants.w_low, constants.w_high
    vm, beta = params.v_minus, model.beta
    if not (0.0 < vs < vm and beta <= vS < vm and ws < 0.0 < wS):
        raise GeometryMismatch(
            f"trap constants out of order: need 0 < v*={vs:.6g} < v-={vm:.6g}, "
            f"beta={beta:.6g} <= v^*={vS:.6g} < v-, w*={ws:.6g} < 0 < w^*={wS:.6g}")
    slope4 = wS / (vm - vS)

    curves = (
        Curve("gamma1", 0.0, vs, lambda t: (t, ws / vs * t), (ws / vs, -1.0)),
        Curve("gamma2", vs, vm, lambda t: (t, np.full_like(t, ws)), (0.0, -1.0)),
        Curve("gamma3", ws, 0.0, lambda t: (np.full_like(t, vm), t), (1.0, 0.0)),
        Curve("gamma4", vS, vm, lambda t: (t, -slope4 * (t - vm)), (slope4, 1.0)),
        Curve("gamma5", 0.0, beta, lambda t: (t, np.full_like(t, wS)), (0.0, 1.0)),
        Curve("connector", beta, vS, lambda t: (t, np.full_like(t, wS)), (0.0, 1.0)),
        Curve("gamma6", 0.0, wS, lambda t: (np.zeros_like(t), t), (-1.0, 0.0)),
    )
    trap = TrapRegion(constants=constants, curves=curves, v_minus=vm, beta=beta)

    ends = {c.name: (c.at(c.t0), c.at(c.t1)) for c in curves}
    joins = [
        (ends["gamma1"][1], ends["gamma2"][0]),
        (ends["gamma2"][1], ends["gamma3"][0]),
        (ends["gamma3"][1], ends["gamma4"][1]),
        (ends["gamma4"][0], ends["connector"][1]),
        (ends["connector"][0], ends["gamma5"][1]),
        (ends["gamma5"][0], ends["gamma6"][1]),
        (ends["gamma6"][0], ends["gamma1"][0]),
    ]
    gap = max(float(np.max(np.abs(a - b))) for a, b in joins)
    if gap > CLOSURE_TOL:
        raise GeometryMismatch(f"trap boundary fails to close: worst corner gap {gap:.3g}")
    saddle = np.array([vm, 0.0])
    if np.max(np.abs(ends["gamma3"][1] - saddle)) > CLOSURE_TOL:
        raise GeometryMismatch("gamma3 does not end at the saddle")
    return trap


@dataclass
class CurveFlux:
    name: str
    samples: int
    max_flux: float
    argmax_point: tuple[float, float]
    inflated_max: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "curve": self.name,
            "samples": self.samples,
            "max_flux": self.max_flux,
            "argmax": list(self.argmax_point),
            "inflated_max": self.inflated_max,
            "pass": self.passed,
        }


@dataclass
class FluxReport:
    curves: list[CurveFlux]
    tolerance: float = EVAL_TOL
    traces: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.curves)

    def __getitem__(self, name: str) -> CurveFlux:
        for c in self.curves:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"pass": self.passed, "tolerance": self.tolerance, "curves": [c.as_dict() for c in self.curves]}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["curve", "parameter", "flux"])
            for name, (t, f) in self.traces.items():
                for ti, fi in zip(t, f):
                    w.writerow([name, f"{ti:.17g}", f"{fi:.17g}"])


def chebyshev_lobatto(t0: float, t1: float, n: int) -> np.ndarray:
    k = np.arange(n)
    x = -np.cos(np.pi * k / (n - 1))
    t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * x
    t[0], t[-1] = t0, t1
    return t


def _curvature_pad(t: np.ndarray, f: np.ndarray, safety: float = 2.0) -> np.ndarray:
    """Per-gap pad ``M2 * dt^2 / 8`` bounding how far ``f`` can rise above its chord.

    ``M2`` bounds ``|f''|`` near the gap, estimated from second divided
    differences on the neighbouring stencils.
    """
    dt = np.diff(t)
    d1 = np.diff(f) / dt
    d2 = 2.0 * np.abs(np.diff(d1) / (t[2:] - t[:-2]))  # |f''| at interior nodes
    m2_node = np.concatenate([[d2[0]], d2, [d2[-1]]])
    m2_gap = np.maximum(m2_node[:-1], m2_node[1:])
    m2_gap = np.maximum(m2_gap, np.concatenate([[m2_gap[0]], m2_gap[:-1]]))
    m2_gap = np.maximum(m2_gap, np.concatenate([m2_gap[1:], [m2_gap[-1]]]))
    return safety * m2_gap * dt**2 / 8.0


def curve_flux(model: ModelSpec, params: WaveParams, curve: Curve, n: int) -> tuple[np.ndarray, np.ndarray]:
    t = chebyshev_lobatto(curve.t0, curve.t1, n)
    V, W = curve.point(t)
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    FV = W
    FW = -h(model, params, W) + model.g(V)
    nx, ny = curve.normal
    return t, nx * FV + ny * FW


def certify_flux(model: ModelSpec, params: WaveParams, trap: TrapRegion, samples_per_curve: int = 10_000,
                 keep_traces: bool = False) -> FluxReport:
    """Evaluate ``n_i . F`` on every boundary curve and certify it is non-positive."""
    out = []
    traces = {}
    for curve in trap.curves:
        t, f = curve_flux(model, params, curve, samples_per_curve)
        k = int(np.argmax(f))
        chord_max = np.maximum(f[:-1], f[1:])
        inflated = float(np.max(chord_max + _curvature_pad(t, f)))
        p = curve.at(t[k])
        out.append(CurveFlux(curve.name, samples_per_curve, float(f[k]), (float(p[0]), float(p[1])),
                             inflated, bool(f[k] <= EVAL_TOL and inflated <= EVAL_TOL)))
        if keep_traces:
            traces[curve.name] = (t, f)
    return FluxReport(out, EVAL_TOL, traces)


def corner_exclusion_check(model: ModelSpec, params: WaveParams, trap: TrapRegion) -> bool:
    """True iff the saddle's stable direction is steeper than the slanted boundary."""
    _, _, ok = saddle_rate_bound(model, params, trap.constants)
    return ok
