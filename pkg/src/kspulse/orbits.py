"""Singular orbit shooting on the critical manifold and epsilon-continuation of the full flow."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Escape, KSPulseError, NoCapture
from .model import ModelSpec, WaveParams, h, singular_w
from .ode import IntegratorConfig, Trajectory, integrate
from .phase_plane import classify_equilibria, reduced_rhs
from .trap import TrapRegion

DEFAULT_OFFSET = 1e-7
HAUSDORFF_NODES = 512


@dataclass
class Orbit:
    """Sampled trajectory.  ``states`` columns are ``(V, W)`` or ``(U, W, V)``."""

    xi: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    terminal_residual: float
    stayed_in_trap: bool
    status: str = "captured"

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def vw(self) -> np.ndarray:
        """Projection on the ``(V, W)`` plane."""
        if self.dim == 2:
            return self.states
        return self.states[:, [2, 1]]

    def vw_derivs(self) -> np.ndarray:
        if self.dim == 2:
            return self.derivs
        return self.derivs[:, [2, 1]]

    def dense_vw(self, max_segment: float = 2e-4) -> np.ndarray:
        """``(V, W)`` polyline refined with cubic Hermite interpolation inside each step."""
        x, y, dy = self.xi, self.vw(), self.vw_derivs()
        if len(x) < 2:
            return y.copy()
        pieces = []
        for k in range(len(x) - 1):
            hk = x[k + 1] - x[k]
            chord = float(np.hypot(*(y[k + 1] - y[k])))
            m = max(1, int(math.ceil(chord / max_segment)))
            t = np.arange(m)[:, None] / m
            h00 = 2 * t**3 - 3 * t**2 + 1
            h10 = t**3 - 2 * t**2 + t
            h01 = -2 * t**3 + 3 * t**2
            h11 = t**3 - t**2
            pieces.append(h00 * y[k] + h10 * hk * dy[k] + h01 * y[k + 1] + h11 * hk * dy[k + 1])
        pieces.append(y[-1:])
        return np.vstack(pieces)

    def resample_arclength(self, n: int = HAUSDORFF_NODES, max_segment: float = 2e-4) -> np.ndarray:
        pts = self.dense_vw(max_segment)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        if s[-1] == 0.0:
            return np.repeat(pts[:1], n, axis=0)
        target = np.linspace(0.0, s[-1], n)
        return np.column_stack([np.interp(target, s, pts[:, j]) for j in range(2)])

    def centered(self) -> "Orbit":
        """Shift ``xi`` so that 0 sits at the profile's extreme ``|W|`` (the pulse core)."""
        k = int(np.argmax(np.abs(self.vw()[:, 1])))
        return replace(self, xi=self.xi - self.xi[k])

    def write_csv(self, path, model: ModelSpec | None = None, params: WaveParams | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "U", "W", "V"])
            for x, st in zip(self.xi, self.states):
                if self.dim == 3:
                    U, W, V = st
                else:
                    V, W = st
                    U = float(h(model, params, W)) if model is not None else math.nan
                w.writerow([f"{x:.17g}", f"{U:.17g}", f"{W:.17g}", f"{V:.17g}"])

    def summary(self) -> dict:
        return {
            "samples": int(len(self.xi)),
            "length": float(self.xi[-1] - self.xi[0]),
            "terminal_residual": self.terminal_residual,
            "stayed_in_trap": self.stayed_in_trap,
            "status": self.status,
        }


def _polyline_distance(points: np.ndarray, poly: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Exact distance from each point to the polyline ``poly`` (all segments, in point chunks)."""
    points = np.asarray(points, dtype=float)
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 1:
        return np.hypot(*(points - poly[0]).T)
    a, ab = poly[:-1], np.diff(poly, axis=0)
    denom = np.einsum("ij,ij->i", ab, ab)
    safe = np.where(denom > 0.0, denom, 1.0)
    out = np.empty(len(points))
    for k in range(0, len(points), chunk):
        p = points[k:k + chunk, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - a, ab) / safe, 0.0, 1.0)
        t = np.where(denom > 0.0, t, 0.0)
        d = a + t[..., None] * ab - p
        out[k:k + chunk] = np.sqrt(np.min(np.einsum("pij,pij->pi", d, d), axis=1))
    return out


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two polylines (vertex-to-segment)."""
    return float(max(_polyline_distance(a, b).max(), _polyline_distance(b, a).max()))


def orbit_distance(o1: Orbit, o2: Orbit, n: int = HAUSDORFF_NODES) -> float:
    return hausdorff(o1.resample_arclength(n), o2.resample_arclength(n))


# --------------------------------------------------------------------------- reduced flow


def _capture_monitor(target: np.ndarray, tol: float, box: tuple[np.ndarray, np.ndarray] | None,
                     trap: TrapRegion | None = None, project=None):
    flags = {"left_trap": False}

    def monitor(xi: float, y: np.ndarray):
        if float(np.linalg.norm(y - target)) < tol:
            return "captured"
        p = project(y) if project is not None else y
        if trap is not None and not trap.contains(p, tol=1e-12):
            flags["left_trap"] = True
            return "escaped"
        if box is not None and (np.any(p < box[0]) or np.any(p > box[1])):
            return "left-box"
        return None

    return monitor, flags


def _finish(tr: Trajectory, target: np.ndarray, stayed: bool) -> Orbit:
    res = float(np.linalg.norm(tr.y[-1] - target))
    return Orbit(tr.xi, tr.y, tr.dy, res, stayed, tr.status)


def integrate_reduced(model: ModelSpec, params: WaveParams, start, config: IntegratorConfig,
                      box: tuple[np.ndarray, np.ndarray] | None = None,
                      trap: TrapRegion | None = None) -> Orbit:
    """Integrate the reduced flow from ``start = (V, W)`` until capture at E+ or an exit."""
    target = np.array([params.v_plus, 0.0])
    if box is None:
        box = _default_box(model, params)
    monitor, flags = _capture_monitor(target, config.event_tol, box, trap)
    tr = integrate(reduced_rhs(model, params), np.asarray(start, dtype=float), config, monitor=monitor)
    return _finish(tr, target, not flags["left_trap"])


def _default_box(model: ModelSpec, params: WaveParams) -> tuple[np.ndarray, np.ndarray]:
    w_top = min(singular_w(model, params), 10.0)
    return np.array([-1e-9, -10.0]), np.array([2.0 * params.v_minus, w_top])


def unstable_direction_reduced(model: ModelSpec, params: WaveParams, sign: float = -1.0) -> np.ndarray:
    saddle = classify_equilibria(model, params)[1]
    lam1 = saddle.eigenvalues[0].real
    v = np.array([1.0, lam1])
    v /= np.linalg.norm(v)
    # sign=-1: W-component negative, pointing into the trapping region
    return v if np.sign(v[1]) == np.sign(sign) else -v


def shoot_heteroclinic(model: ModelSpec, params: WaveParams, trap: TrapRegion | None,
                       offset: float = DEFAULT_OFFSET, config: IntegratorConfig | None = None,
                       sign: float = -1.0) -> Orbit:
    """Singular orbit from the saddle E- to the attractor E+ of the reduced flow.

    Launches along the unstable eigendirection (``sign=-1`` enters the trapping
    region) and requires every accepted step to stay inside ``trap``.
    """
    config = config or IntegratorConfig()
    E_minus = np.array([params.v_minus, 0.0])
    start = E_minus + offset * unstable_direction_reduced(model, params, sign)
    orbit = integrate_reduced(model, params, start, config, trap=trap)
    if orbit.status == "escaped":
        raise Escape(f"orbit left the trapping region at xi={orbit.xi[-1]:.6g}, state={orbit.states[-1]}")
    if orbit.status == "left-box":
        raise Escape(f"orbit left the bounding box at xi={orbit.xi[-1]:.6g}")
    if orbit.status != "captured":
        raise NoCapture(f"no capture at E+ within length {config.max_length:g} ({orbit.status})")
    return orbit


# --------------------------------------------------------------------------- full slow system


def slow_rhs(model: ModelSpec, params: WaveParams):
    eps, s, chi, um = params.epsilon, params.s, model.chi, params.u_minus
    a0 = model.critical_speed - s

    def f(y: np.ndarray) -> np.ndarray:
        U, W, V = y
        aW = chi * model.phi(W) - s
        return np.array([(aW * U - a0 * um) / eps, -eps * s * W - U + model.g(V), W])

    return f


def slow_jacobian(model: ModelSpec, params: WaveParams, y) -> np.ndarray:
    U, W, V = y
    eps, s, chi = params.epsilon, params.s, model.chi
    return np.array(
        [
            [(chi * model.phi(W) - s) / eps, chi * U * model.phi_prime(W) / eps, 0.0],
            [-1.0, -eps * s, model.g_prime(V)],
            [0.0, 1.0, 0.0],
        ],
        dtype=float,
    )


def slow_linear_part(model: ModelSpec, params: WaveParams):
    """Frozen fast-fibre rate and relaxation target for the integrating-factor step."""
    eps, s, chi = params.epsilon, params.s, model.chi

    def linear(y: np.ndarray):
        W = y[1]
        rate = (chi * model.phi(W) - s) / eps
        return np.array([rate, 0.0, 0.0]), np.array([float(h(model, params, W)), 0.0, 0.0])

    return linear


def integrate_slow(model: ModelSpec, params: WaveParams, start, config: IntegratorConfig,
                   box: tuple[np.ndarray, np.ndarray] | None = None, exponential: bool = False) -> Orbit:
    """Integrate ``(U, W, V)`` under the slow system until capture at ``(u-, 0, v+)``."""
    target = np.array([params.u_minus, 0.0, params.v_plus])
    if box is None:
        box = _default_box(model, params)
    monitor, _ = _capture_monitor(target, config.event_tol, box, project=lambda y: y[[2, 1]])
    linear = slow_linear_part(model, params) if exponential else None
    tr = integrate(slow_rhs(model, params), np.asarray(start, dtype=float), config, linear=linear,
                   monitor=monitor)
    return _finish(tr, target, True)


def unstable_direction_slow(model: ModelSpec, params: WaveParams, previous: np.ndarray | None = None) -> np.ndarray:
    J = slow_jacobian(model, params, (params.u_minus, 0.0, params.v_minus))
    vals, vecs = np.linalg.eig(J)
    k = int(np.argmax(vals.real))
    if not vals[k].real > 0.0:
        raise KSPulseError("slow-system saddle has no unstable direction")
    v = np.real(vecs[:, k])
    v /= np.linalg.norm(v)
    if previous is not None:
        return v if float(v @ previous) >= 0.0 else -v
    return v if v[1] < 0.0 else -v


def shoot_slow(model: ModelSpec, params: WaveParams, offset: float = DEFAULT_OFFSET,
               config: IntegratorConfig | None = None, previous: np.ndarray | None = None,
               exponential: bool = False) -> tuple[Orbit, np.ndarray]:
    config = config or IntegratorConfig()
    direction = unstable_direction_slow(model, params, previous)
    start = np.array([params.u_minus, 0.0, params.v_minus]) + offset * direction
    orbit = integrate_slow(model, params, start, config, exponential=exponential)
    if orbit.status != "captured":
        raise NoCapture(f"slow orbit not captured at eps={params.epsilon:g} ({orbit.status})")
    return orbit, direction


def manifold_defect(model: ModelSpec, params: WaveParams, orbit: Orbit, layer: float = 0.1) -> float:
    """``max |U - h(W)|`` over samples past the initial layer."""
    keep = orbit.xi - orbit.xi[0] > layer
    U, W = orbit.states[keep, 0], orbit.states[keep, 1]
    return float(np.max(np.abs(U - h(model, params, W)))) if np.any(keep) else 0.0


@dataclass
class Rung:
    epsilon: float
    orbit: Orbit | None
    distance: float
    defect: float
    error: str | None = None

    def as_dict(self) -> dict:
        d = {"epsilon": self.epsilon, "distance_to_singular": self.distance,
             "manifold_defect": self.defect, "error": self.error}
        if self.orbit is not None:
            d["orbit"] = self.orbit.summary()
        return d


@dataclass
class Continuation:
    rungs: list[Rung]
    singular: Orbit
    fit: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"rungs": [r.as_dict() for r in self.rungs], "fit": self.fit,
                "singular": self.singular.summary()}


def fit_loglog(eps: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log(values)`` against ``log(eps)``."""
    slope, intercept = np.polyfit(np.log(eps), np.log(values), 1)
    return float(slope), float(intercept)


def continue_in_epsilon(model: ModelSpec, params: WaveParams, epsilon_ladder, singular: Orbit,
                        config: IntegratorConfig | None = None, offset: float = DEFAULT_OFFSET,
                        trap: TrapRegion | None = None, n_nodes: int = HAUSDORFF_NODES,
                        exponential: bool = False) -> Continuation:
    """Shadow the singular orbit with full-system orbits along a decreasing epsilon ladder.

    Each rung shoots from the 3-D saddle's unstable direction; the previous
    rung's direction fixes the branch.  Rung failures are recorded, not raised.
    """
    config = config or IntegratorConfig()
    rungs: list[Rung] = []
    previous = None
    ref = singular.resample_arclength(n_nodes)
    for eps in epsilon_ladder:
        eps = float(eps)
        if eps == 0.0:
            orbit0 = shoot_heteroclinic(model, params.with_epsilon(0.0), trap, offset, config)
            rungs.append(Rung(0.0, orbit0, hausdorff(orbit0.resample_arclength(n_nodes), ref), 0.0))
            continue
        p = params.with_epsilon(eps)
        try:
            orbit, previous = shoot_slow(model, p, offset, config, previous, exponential)
        except KSPulseError as exc:
            rungs.append(Rung(eps, None, math.nan, math.nan, f"{exc.code}: {exc}"))
            continue
        d = hausdorff(orbit.resample_arclength(n_nodes), ref)
        rungs.append(Rung(eps, orbit, d, manifold_defect(model, p, orbit)))

    ok = [r for r in rungs if r.error is None and r.epsilon > 0.0]
    fit: dict = {}
    if len(ok) >= 2:
        e = np.array([r.epsilon for r in ok])
        d = np.array([r.distance for r in ok])
        slope, _ = fit_loglog(e, d)
        C = np.array([r.defect for r in ok]) / e
        fit = {
            "distance_slope": slope,
            "distance_strictly_decreasing": bool(np.all(np.diff(d) < 0.0)),
            "defect_constants": C.tolist(),
            "defect_constant_fit": float(np.exp(np.mean(np.log(C)))),
            "defect_constant_spread": float(C.max() / C.min()),
        }
    return Continuation(rungs, singular, fit)
