"""Stage orchestration and report emission."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, as_dict
from .errors import KSPulseError
from .model import ModelSpec, WaveParams, build_model, wave_params
from .ode import IntegratorConfig
from .orbits import Orbit, continue_in_epsilon, orbit_distance, shoot_heteroclinic, shoot_slow
from .pde import Grid1D, growth_probe, mass, pulse_width, run, seed_pulse, track_speed, write_frame_csv
from .phase_plane import classify_equilibria
from .speed_window import pick_trap_constants, require_window, saddle_rate_bound, speed_bounds
from .spectrum import (asymptotic_matrices, dispersion_curve, dispersion_roots, k_profile, max_growth,
                       resolvent_bound_check, smooth_forcing, tau_grid, weight_polynomial_check,
                       write_dispersion_csv)
from .trap import build_trap, certify_flux, corner_exclusion_check

DEPENDS = {
    "states": (),
    "window": ("states",),
    "equilibria": ("window",),
    "trap": ("window",),
    "shoot": ("trap",),
    "continuation": ("shoot",),
    "spectrum": ("window",),
    "resolvent": ("window",),
    "pde": ("window",),
}
ORDER = tuple(DEPENDS)
ABOVE_ONLY = {"trap", "shoot", "continuation", "resolvent", "pde"}
SEED_CONFIG = IntegratorConfig(rtol=1e-12, atol=1e-14, event_tol=1e-11, max_step=0.5)


# --------------------------------------------------------------------------- serialization


def _json(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{_json(str(k))}: {_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return f"{x:.17g}" if math.isfinite(x) else "null"
    if isinstance(obj, complex):
        return _json([obj.real, obj.imag])
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{s}"'


def dumps(obj) -> str:
    """JSON text with 17 significant digits per float; non-finite floats become null."""
    return _json(obj) + "\n"


# --------------------------------------------------------------------------- report


@dataclass
class StageResult:
    status: str  # ok | failed | skipped
    result: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    error: str | None = None
    seconds: float = 0.0

    def as_dict(self) -> dict:
        d = {"status": self.status, "checks": self.checks, "result": self.result}
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class Report:
    config: RunConfig
    stages: dict[str, StageResult] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(st.status != "failed" for st in self.stages.values())

    def as_dict(self) -> dict:
        return {
            "toolkit": {"name": "kspulse", "version": __version__},
            "ok": self.ok,
            "config": as_dict(self.config),
            "stages": {k: v.as_dict() for k, v in self.stages.items()},
        }

    def timings(self) -> dict:
        return {k: v.seconds for k, v in self.stages.items()}

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "report.json"
        path.write_text(dumps(self.as_dict()))
        (out_dir / "timings.json").write_text(dumps(self.timings()))
        return path


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    model: ModelSpec | None = None
    params: WaveParams | None = None
    window: object = None
    trap: object = None
    singular: Orbit | None = None

    @property
    def integrator(self) -> IntegratorConfig:
        o = self.cfg.orbit
        return IntegratorConfig(rtol=o.rtol, atol=o.atol, max_step=o.max_step, max_length=o.max_length,
                                event_tol=o.event_tol)


def _closure(stages) -> list[str]:
    need = set()

    def add(s):
        if s not in need:
            need.add(s)
            for d in DEPENDS[s]:
                add(d)

    for s in stages:
        add(s)
    add("states")
    return [s for s in ORDER if s in need]


# --------------------------------------------------------------------------- stages


def stage_states(ctx: Context):
    cfg = ctx.cfg
    ctx.model = build_model(cfg.family, cfg.model_kwargs())
    ctx.params = wave_params(ctx.model, cfg.wave.u_minus)
    p = ctx.params
    res = {"family": ctx.model.family, "model_params": dict(ctx.model.params), "u_minus": p.u_minus,
           "v_minus": p.v_minus, "v_plus": p.v_plus,
           "g_residuals": [float(ctx.model.g(p.v_minus)) - p.u_minus, float(ctx.model.g(p.v_plus)) - p.u_minus]}
    return res, {"ordered": p.v_plus < ctx.model.beta < p.v_minus}


def stage_window(ctx: Context):
    cfg, model = ctx.cfg, ctx.model
    win = require_window(speed_bounds(model, cfg.wave.u_minus, cfg.wave.branch))
    ctx.window = win
    s = win.midpoint if cfg.wave.s == "auto" else float(cfg.wave.s)
    ctx.params = ctx.params.with_speed(s)
    res = {**win.as_dict(), "s": s, "critical_speed": model.critical_speed}
    return res, {"nonempty": not win.is_empty, "s_inside": win.s_lower < s < win.s_upper}


def stage_equilibria(ctx: Context):
    eqs = classify_equilibria(ctx.model, ctx.params)
    res = {"E_plus": eqs[0].as_dict(), "E_minus": eqs[1].as_dict()}
    return res, {"E_minus_saddle": eqs[1].is_saddle}


def stage_trap(ctx: Context):
    cfg, model = ctx.cfg, ctx.model
    rows = []
    speeds = list(ctx.window.interior_speeds(cfg.trap.speeds))
    for s in speeds + [ctx.params.s]:
        p = ctx.params.with_speed(s)
        consts = pick_trap_constants(model, p, cfg.trap.margin)
        trap = build_trap(model, p, consts)
        rep = certify_flux(model, p, trap, cfg.trap.samples, keep_traces=(s == ctx.params.s))
        lam2, bound, ok = saddle_rate_bound(model, p, consts)
        rows.append({"s": s, "constants": consts.as_dict(), "flux": rep.as_dict(), "lambda2": lam2,
                     "slant_bound": bound, "saddle_rate_ok": ok,
                     "corner_exclusion": corner_exclusion_check(model, p, trap),
                     "E_plus_inside": trap.contains((p.v_plus, 0.0))})
        if s == ctx.params.s:
            ctx.trap = trap
            rep.write_csv(ctx.out / "trap_flux.csv")
    checks = {
        "flux_all_speeds": all(r["flux"]["pass"] for r in rows),
        "saddle_rate_all_speeds": all(r["saddle_rate_ok"] for r in rows),
        "E_plus_inside": all(r["E_plus_inside"] for r in rows),
    }
    return {"samples_per_curve": cfg.trap.samples, "speeds": rows}, checks


def stage_shoot(ctx: Context):
    cfg = ctx.cfg
    off = cfg.orbit.offset
    orbit = shoot_heteroclinic(ctx.model, ctx.params, ctx.trap, off, ctx.integrator)
    half = shoot_heteroclinic(ctx.model, ctx.params, ctx.trap, off / 2.0, ctx.integrator)
    d = orbit_distance(orbit, half, 4 * cfg.orbit.hausdorff_nodes)
    ctx.singular = orbit
    orbit.write_csv(ctx.out / "singular_orbit.csv", ctx.model, ctx.params)
    res = {"offset": off, **orbit.summary(), "halving_distance": d, "capture_tol": cfg.orbit.event_tol}
    checks = {"captured": orbit.terminal_residual < cfg.orbit.event_tol, "stayed_in_trap": orbit.stayed_in_trap,
              "offset_halving": d < 10.0 * off}
    return res, checks


def stage_continuation(ctx: Context):
    cfg = ctx.cfg
    cont = continue_in_epsilon(ctx.model, ctx.params, cfg.continuation.ladder, ctx.singular, ctx.integrator,
                               cfg.orbit.offset, ctx.trap, cfg.orbit.hausdorff_nodes)
    with open(ctx.out / "continuation.csv", "w") as fh:
        fh.write("epsilon,hausdorff_distance,manifold_defect\n")
        for r in cont.rungs:
            fh.write(f"{r.epsilon:.17g},{r.distance:.17g},{r.defect:.17g}\n")
    fit = cont.fit
    c = cfg.continuation
    checks = {
        "all_rungs_captured": all(r.error is None for r in cont.rungs),
        "distance_strictly_decreasing": bool(fit.get("distance_strictly_decreasing", False)),
        "slope_in_range": c.slope_low <= fit.get("distance_slope", math.nan) <= c.slope_high,
        "defect_constant_stable": fit.get("defect_constant_spread", math.inf) <= c.defect_spread,
    }
    return cont.as_dict(), checks


def stage_spectrum(ctx: Context):
    cfg, model = ctx.cfg, ctx.model
    sp = cfg.spectrum
    taus = tau_grid(sp.tau_range, sp.tau_points)
    rows, checks = [], {"tau0_roots": True, "unstable_all_rho": True, "P_positive": True, "disc_negative": True}
    for eps in sp.epsilons:
        p = ctx.params.with_epsilon(eps)
        d0 = dispersion_roots(asymptotic_matrices(model, p, "+", 0.0), 0.0)
        expected = -float(model.g_prime(p.v_plus)) / eps
        err = max(abs(d0.lambda_plus - expected), abs(d0.lambda_minus))
        plus, minus = [], []
        for rho in sp.rho:
            mats = asymptotic_matrices(model, p, "+", rho)
            plus.append({"rho": rho, **max_growth(mats, taus).as_dict()})
            minus.append({"rho": rho, **max_growth(asymptotic_matrices(model, p, "-", rho), taus).as_dict()})
            write_dispersion_csv(ctx.out / f"dispersion_eps{eps:g}_rho{rho:g}.csv", dispersion_curve(mats, taus))
        wp = weight_polynomial_check(model, p, [r for r in sp.rho if r > 0.0] or [0.0])
        rows.append({"epsilon": eps, "tau0_roots": [d0.lambda_plus, d0.lambda_minus], "tau0_expected": expected,
                     "tau0_error": err, "side_plus": plus, "side_minus": minus, "weight_polynomial": wp})
        checks["tau0_roots"] &= err <= 1e-10 * max(1.0, abs(expected))
        checks["unstable_all_rho"] &= all(r["positive"] for r in plus)
        checks["P_positive"] &= wp["P_positive"]
        checks["disc_negative"] &= wp["discriminant_negative"]
    return {"tau_range": sp.tau_range, "tau_points": sp.tau_points, "by_epsilon": rows}, checks


def stage_resolvent(ctx: Context):
    cfg, model = ctx.cfg, ctx.model
    rc = cfg.resolvent
    p = ctx.params.with_epsilon(rc.epsilon)
    orbit, _ = shoot_slow(model, p, cfg.orbit.offset, ctx.integrator)
    n = int(round(2 * rc.half_span / rc.spacing)) + 1
    x = np.linspace(-rc.half_span, rc.half_span, n)
    k = k_profile(model, p, orbit, x)
    rng = np.random.default_rng(rc.seed)
    lams, forcings = [], []
    for _ in range(rc.samples):
        re = math.exp(rng.uniform(math.log(rc.re_min), math.log(rc.re_max)))
        theta = rng.uniform(-0.45 * math.pi, 0.45 * math.pi)
        lams.append(complex(re, re * math.tan(theta)))
        forcings.append(smooth_forcing(rng, x))
    rep = resolvent_bound_check(rc.epsilon, lams, forcings, x, k)
    res = {"epsilon": rc.epsilon, "spacing": rc.spacing, "k_sup": float(np.max(np.abs(k))), **rep.as_dict(),
           "residual_tol": 1e-4}
    return res, {"residual": rep.max_residual < 1e-4, "bound": rep.passed}


def stage_pde(ctx: Context):
    cfg, model = ctx.cfg, ctx.model
    pc = cfg.pde
    p = ctx.params.with_epsilon(pc.epsilon)
    orbit, _ = shoot_slow(model, p, cfg.orbit.offset, SEED_CONFIG)
    width = pulse_width(orbit, p.u_minus)
    span = pc.widths * width
    grid = Grid1D(-0.5 * span, 0.5 * span, pc.nodes)
    state = seed_pulse(model, p, orbit, grid)
    stride = max(1, int(round(pc.horizon / pc.frames / pc.dt)))
    out = run(model, p, grid, state, pc.dt, pc.horizon, frame_stride=stride)
    speed = track_speed(grid, out.frames, p.u_minus)
    m0 = mass(grid, state)
    drift = abs(mass(grid, out.final) - m0) / m0 * 1000.0 / out.steps
    if pc.dump_frames:
        for i, fr in enumerate(out.frames):
            write_frame_csv(ctx.out / f"pde_frame_{i:03d}.csv", grid, fr)
    gm = growth_probe(model, p, grid, state, pc.growth_amplitude, pc.growth_horizon, pc.growth_dt)
    predicted = max_growth(asymptotic_matrices(model, p, "+", 0.0)).lam.real
    res = {"epsilon": pc.epsilon, "nodes": pc.nodes, "dx": grid.dx, "pulse_width": width, "domain": span,
           "horizon": pc.horizon, "dt": pc.dt, "steps": out.steps, "s": p.s, "measured_speed": speed,
           "speed_rel_error": abs(speed / p.s - 1.0), "speed_tol": pc.speed_tol,
           "mass_drift_per_1000_steps": drift, "mass_tol": 1e-8, **gm.as_dict(), "predicted_rate": predicted,
           "rate_ratio": gm.rate / predicted,
           "rate_within_factor_2": bool(0.5 <= gm.rate / predicted <= 2.0),
           "note": "the factor-2 rate agreement is an engineering target and is not gated"}
    checks = {"speed": abs(speed / p.s - 1.0) < pc.speed_tol, "mass": drift < 1e-8, "growth_positive": gm.rate > 0.0}
    return res, checks


STAGE_FUNCS = {
    "states": stage_states,
    "window": stage_window,
    "equilibria": stage_equilibria,
    "trap": stage_trap,
    "shoot": stage_shoot,
    "continuation": stage_continuation,
    "spectrum": stage_spectrum,
    "resolvent": stage_resolvent,
    "pde": stage_pde,
}


def run_pipeline(cfg: RunConfig, out_dir: Path | None = None, write: bool = True) -> Report:
    """Run the enabled stages (plus their prerequisites) in dependency order.

    A failed stage marks its dependents skipped; independent stages still run.
    """
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, out)
    report = Report(cfg)
    for name in _closure(cfg.stages):
        blocked = [d for d in DEPENDS[name] if report.stages.get(d) is None or report.stages[d].status != "ok"]
        if blocked:
            report.stages[name] = StageResult("skipped", error=f"prerequisite {blocked[0]} did not succeed")
            continue
        if name in ABOVE_ONLY and cfg.wave.branch == "below":
            report.stages[name] = StageResult("skipped", error="orbit stages are implemented for the branch above only")
            continue
        t0 = time.perf_counter()
        try:
            res, checks = STAGE_FUNCS[name](ctx)
            checks = {k: bool(v) for k, v in checks.items()}
            status = "ok" if all(checks.values()) else "failed"
            report.stages[name] = StageResult(status, res, checks,
                                              None if status == "ok" else "check(s) failed: " + ", ".join(
                                                  k for k, v in checks.items() if not v))
        except KSPulseError as exc:
            report.stages[name] = StageResult("failed", error=f"{exc.code}: {exc}")
        report.stages[name].seconds = time.perf_counter() - t0
    if write:
        report.write(out)
    return report
