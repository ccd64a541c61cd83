"""Method-of-lines simulation of the chemotaxis system on a truncated line.

    u_t = (eps u_x - chi u phi(v_x))_x,    eps v_t = v_xx + u - g(v)

Vertex-centred grid, half control volumes at the walls.  One step is
linearly implicit Euler for diffusion and the reaction (a single Newton
correction on ``g``) and explicit second-order upwind advection with a
minmod limiter.  "neumann" walls mirror ``u`` and ``v`` (zero gradient) and
let the advective flux ``chi u phi(0)`` pass through, so flat tails stay
exactly flat and mass balances whenever both walls see the same ``u``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_banded

from .errors import DomainTooShort, NoLinearWindow, PeakLost
from .model import ModelSpec, WaveParams
from .orbits import Orbit, slow_jacobian

CFL = 0.5


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int
    boundary: str = "neumann"

    def __post_init__(self):
        if self.n < 64:
            raise ValueError(f"grid needs at least 64 nodes, got {self.n}")
        if self.boundary not in ("neumann", "periodic"):
            raise ValueError(f"boundary must be 'neumann' or 'periodic', got {self.boundary!r}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        span = self.x_max - self.x_min
        return span / (self.n - 1) if self.boundary == "neumann" else span / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def weights(self) -> np.ndarray:
        """Control-volume sizes (trapezoid weights for neumann)."""
        w = np.full(self.n, self.dx)
        if self.boundary == "neumann":
            w[0] = w[-1] = 0.5 * self.dx
        return w

    def refined(self) -> "Grid1D":
        n = 2 * self.n - 1 if self.boundary == "neumann" else 2 * self.n
        return replace(self, n=n)


@dataclass
class PDEState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self) -> "PDEState":
        return PDEState(self.u.copy(), self.v.copy(), self.t)


def mass(grid: Grid1D, state: PDEState) -> float:
    return float(np.sum(grid.weights * state.u))


# --------------------------------------------------------------------------- spatial operators


def _second_difference(grid: Grid1D, y: np.ndarray) -> np.ndarray:
    dx2 = grid.dx**2
    if grid.boundary == "periodic":
        return (np.roll(y, -1) - 2.0 * y + np.roll(y, 1)) / dx2
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / dx2
    out[0] = 2.0 * (y[1] - y[0]) / dx2
    out[-1] = 2.0 * (y[-2] - y[-1]) / dx2
    return out


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def advection_speed(model: ModelSpec, grid: Grid1D, v: np.ndarray) -> np.ndarray:
    """``chi phi(v_x)`` on the faces ``i + 1/2`` (n - 1 faces, or n when periodic)."""
    if grid.boundary == "periodic":
        vx = (np.roll(v, -1) - v) / grid.dx
    else:
        vx = np.diff(v) / grid.dx
    return model.chi * model.phi(vx)


def advection(model: ModelSpec, grid: Grid1D, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``-(chi u phi(v_x))_x`` in conservative MUSCL-minmod form."""
    a = advection_speed(model, grid, v)
    if grid.boundary == "periodic":
        up = np.concatenate([u[-2:], u, u[:2]])
    else:
        up = np.concatenate([u[:1], u[:1], u, u[-1:], u[-1:]])  # flat ghosts
    slope = _minmod(up[1:-1] - up[:-2], up[2:] - up[1:-1])  # per padded cell 1..n+2
    left_state = up[1:-1] + 0.5 * slope  # value at right face of each cell
    right_state = up[1:-1] - 0.5 * slope  # value at left face
    # faces between original cells i and i+1, i = 0..n-2 (plus wrap face when periodic)
    n = len(u)
    if grid.boundary == "periodic":
        uL = left_state[1 : n + 1]
        uR = right_state[2 : n + 2]
        F = np.where(a > 0.0, a * uL, a * uR)
        return -(F - np.roll(F, 1)) / grid.dx
    uL = left_state[1:n]
    uR = right_state[2 : n + 1]
    F = np.where(a > 0.0, a * uL, a * uR)
    wall = model.chi * float(model.phi(0.0))
    F_left, F_right = wall * u[0], wall * u[-1]
    div = np.empty(n)
    div[1:-1] = (F[1:] - F[:-1]) / grid.dx
    div[0] = (F[0] - F_left) / (0.5 * grid.dx)
    div[-1] = (F_right - F[-1]) / (0.5 * grid.dx)
    return -div


def cfl_limit(model: ModelSpec, grid: Grid1D, v: np.ndarray) -> float:
    amax = float(np.max(np.abs(advection_speed(model, grid, v))))
    return math.inf if amax == 0.0 else CFL * grid.dx / amax


def _solve(grid: Grid1D, diag: np.ndarray, off: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(diag - off * dx^2 * D2) x = rhs`` for the grid's second difference ``D2``."""
    n = grid.n
    c = off / grid.dx**2
    if grid.boundary == "neumann":
        ab = np.zeros((3, n))
        ab[1] = diag + 2.0 * c
        ab[0, 1:] = -c
        ab[2, :-1] = -c
        ab[0, 1] = -2.0 * c
        ab[2, -2] = -2.0 * c
        return solve_banded((1, 1), ab, rhs)
    # periodic: Sherman-Morrison on the cyclic tridiagonal system
    ab = np.zeros((3, n))
    gamma = -(diag[0] + 2.0 * c)
    ab[1] = diag + 2.0 * c
    ab[0, 1:] = -c
    ab[2, :-1] = -c
    ab[1, 0] -= gamma
    ab[1, -1] -= (-c) * (-c) / gamma
    uvec = np.zeros(n)
    uvec[0], uvec[-1] = gamma, -c
    y = solve_banded((1, 1), ab, rhs)
    z = solve_banded((1, 1), ab, uvec)
    vvec0, vvecn = 1.0, -c / gamma
    return y - z * (y[0] * vvec0 + y[-1] * vvecn) / (1.0 + z[0] * vvec0 + z[-1] * vvecn)


Source = Callable[[float, np.ndarray], tuple[np.ndarray, np.ndarray]]


def step(model: ModelSpec, params: WaveParams, grid: Grid1D, state: PDEState, dt: float,
         source: Source | None = None) -> PDEState:
    """Advance one IMEX step of size ``dt``.

    ``source(t, x) -> (S_u, S_v)`` adds forcing to the right-hand sides (the
    v-source enters as ``eps v_t = ... + S_v``); used for manufactured solutions.
    """
    eps = params.epsilon
    u, v = state.u, state.v
    limit = cfl_limit(model, grid, v)
    if dt > limit * (1.0 + 1e-12):
        warnings.warn(f"dt={dt:.3g} exceeds the advective CFL limit {limit:.3g}", RuntimeWarning, stacklevel=2)
    Su = Sv = 0.0
    if source is not None:
        Su, Sv = source(state.t, grid.x)
    rhs_u = dt * (eps * _second_difference(grid, u) + advection(model, grid, u, v) + Su)
    du = _solve(grid, np.ones(grid.n), dt * eps, rhs_u)
    u_new = u + du
    gp = model.g_prime(v)
    rhs_v = dt * (_second_difference(grid, v) + u_new - model.g(v) + Sv)
    dv = _solve(grid, eps + dt * gp, dt, rhs_v)
    return PDEState(u_new, v + dv, state.t + dt)


@dataclass
class RunResult:
    frames: list[PDEState]
    final: PDEState
    steps: int
    mass_drift: list[float] = field(default_factory=list)


def run(model: ModelSpec, params: WaveParams, grid: Grid1D, state: PDEState, dt: float, t_end: float,
        frame_stride: int | None = None, source: Source | None = None,
        on_frame: Callable[[PDEState], None] | None = None) -> RunResult:
    """March to ``t_end``; ``frame_stride`` keeps every k-th state (plus the first and last)."""
    n_steps = max(1, int(math.ceil((t_end - state.t) / dt - 1e-9)))
    dt = (t_end - state.t) / n_steps
    frames = [state.copy()] if frame_stride else []
    m0 = mass(grid, state)
    drift = []
    cur = state
    for k in range(1, n_steps + 1):
        cur = step(model, params, grid, cur, dt, source)
        if frame_stride and (k % frame_stride == 0 or k == n_steps):
            frames.append(cur.copy())
            drift.append(abs(mass(grid, cur) - m0) / abs(m0) if m0 else 0.0)
            if on_frame is not None:
                on_frame(cur)
    return RunResult(frames, cur, n_steps, drift)


def write_frame_csv(path, grid: Grid1D, state: PDEState) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u", "v"])
        for xi, ui, vi in zip(grid.x, state.u, state.v):
            w.writerow([f"{xi:.17g}", f"{ui:.17g}", f"{vi:.17g}"])


# --------------------------------------------------------------------------- seeding and diagnostics


def pulse_width(orbit: Orbit, u_minus: float, rel: float = 0.5) -> float:
    """Width of the ``xi``-range where ``|U - u-|`` exceeds ``rel`` of its maximum (FWHM by default)."""
    dev = np.abs(orbit.states[:, 0] - u_minus)
    big = np.nonzero(dev > rel * dev.max())[0]
    return float(orbit.xi[big[-1]] - orbit.xi[big[0]])


def seed_pulse(model: ModelSpec, params: WaveParams, orbit: Orbit, grid: Grid1D) -> PDEState:
    """Place the full-system profile with its core at the domain midpoint.

    Left of the orbit the profile follows the linear unstable solution out of
    ``(u-, 0, v-)``; right of it the state is ``(u-, v+)``.
    """
    if orbit.dim != 3:
        raise ValueError("seeding needs a full (U, W, V) orbit")
    width = pulse_width(orbit, params.u_minus)
    if grid.x_max - grid.x_min < 4.0 * width:
        raise DomainTooShort(f"domain {grid.x_max - grid.x_min:.4g} is shorter than 4x the pulse width {width:.4g}")
    o = orbit.centered()
    x = grid.x - 0.5 * (grid.x_min + grid.x_max)
    keep = np.concatenate([[True], np.diff(o.xi) > 0])
    xi, st, dst = o.xi[keep], o.states[keep], o.derivs[keep]
    U = CubicHermiteSpline(xi, st[:, 0], dst[:, 0])
    V = CubicHermiteSpline(xi, st[:, 2], dst[:, 2])

    u = np.full(grid.n, params.u_minus)
    v = np.full(grid.n, params.v_plus)
    inside = (x >= xi[0]) & (x <= xi[-1])
    u[inside] = U(x[inside])
    v[inside] = V(x[inside])

    left = x < xi[0]
    J = slow_jacobian(model, params, (params.u_minus, 0.0, params.v_minus))
    lam = np.linalg.eigvals(J).real.max()
    decay = np.exp(lam * (x[left] - xi[0]))
    u[left] = params.u_minus + (st[0, 0] - params.u_minus) * decay
    v[left] = params.v_minus + (st[0, 2] - params.v_minus) * decay
    return PDEState(u, v, 0.0)


def locate_peak(grid: Grid1D, u: np.ndarray, background: float | None = None) -> float:
    """Sub-grid position of the largest ``|u - background|`` (three-point parabola)."""
    bg = float(u[0]) if background is None else background
    dev = np.abs(u - bg)
    k = int(np.argmax(dev))
    if dev[k] < 0.1 * abs(bg):
        raise PeakLost(f"pulse amplitude {dev[k]:.3g} below 10% of the background {bg:.3g}")
    x = grid.x
    if 0 < k < grid.n - 1:
        y0, y1, y2 = dev[k - 1], dev[k], dev[k + 1]
        den = y0 - 2.0 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0.0 else 0.0
        return float(x[k] + np.clip(off, -0.5, 0.5) * grid.dx)
    return float(x[k])


def track_speed(grid: Grid1D, frames: list[PDEState], background: float | None = None) -> float:
    """Least-squares slope of the pulse position against time."""
    if len(frames) < 10:
        raise ValueError(f"speed tracking needs at least 10 frames, got {len(frames)}")
    bg = float(frames[0].u[0]) if background is None else background
    t = np.array([f.t for f in frames])
    pos = np.array([locate_peak(grid, f.u, bg) for f in frames])
    slope, _ = np.polyfit(t, pos, 1)
    return float(slope)


def bump(grid: Grid1D, centre: float, width: float) -> np.ndarray:
    return np.exp(-(((grid.x - centre) / width) ** 2))


@dataclass
class GrowthMeasurement:
    rate: float
    window: tuple[float, float]
    times: np.ndarray
    norms: np.ndarray

    def as_dict(self) -> dict:
        return {"measured_rate": self.rate, "window": list(self.window)}


def growth_probe(model: ModelSpec, params: WaveParams, grid: Grid1D, state: PDEState, amplitude: float,
                 horizon: float, dt: float, centre: float | None = None, width: float = 5.0,
                 low: float = 2.0, high: float = 20.0) -> GrowthMeasurement:
    """Exponential growth rate of a small v-bump placed ahead of the pulse.

    Runs the perturbed and unperturbed states side by side and fits
    ``log ||difference||_inf`` while it lies between ``low`` and ``high`` times
    its initial size.
    """
    if centre is None:
        peak = locate_peak(grid, state.u, float(state.u[0]))
        centre = peak + 0.25 * (grid.x_max - peak)
    pert = state.copy()
    pert.v = pert.v + amplitude * bump(grid, centre, width)
    ref = state.copy()
    n0 = float(np.max(np.abs(pert.v - ref.v)))
    if not n0 > 0.0:
        raise NoLinearWindow("zero perturbation: nothing to grow")
    n_steps = int(math.ceil(horizon / dt))
    times, norms = [0.0], [n0]
    for _ in range(n_steps):
        ref = step(model, params, grid, ref, dt)
        pert = step(model, params, grid, pert, dt)
        nrm = float(max(np.max(np.abs(pert.u - ref.u)), np.max(np.abs(pert.v - ref.v))))
        times.append(ref.t)
        norms.append(nrm)
        if nrm > high * n0:
            break
    times, norms = np.array(times), np.array(norms)
    lo_hits = np.nonzero(norms >= low * n0)[0]
    hi_hits = np.nonzero(norms >= high * n0)[0]
    if len(lo_hits) == 0 or len(hi_hits) == 0:
        raise NoLinearWindow(f"perturbation grew by {norms.max() / n0:.3g}x, never spanning {low:g}x-{high:g}x")
    i0, i1 = lo_hits[0], hi_hits[0]
    if i1 - i0 < 2:
        raise NoLinearWindow("linear window shorter than three samples; reduce dt")
    slope, _ = np.polyfit(times[i0 : i1 + 1], np.log(norms[i0 : i1 + 1]), 1)
    return GrowthMeasurement(float(slope), (float(times[i0]), float(times[i1])), times, norms)
