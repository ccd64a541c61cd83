"""Command-line entry point: one subcommand per pipeline stage plus ``pipeline``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config, validate
from .errors import ConfigError
from .pipeline import dumps, run_pipeline

EXIT_OK, EXIT_STAGE, EXIT_CONFIG = 0, 1, 2

SUBCOMMANDS = {
    "equilibria": ("equilibria",),
    "speed-window": ("window",),
    "certify-trap": ("trap",),
    "shoot": ("shoot",),
    "continue-eps": ("continuation",),
    "spectrum": ("spectrum",),
    "resolvent-check": ("resolvent",),
    "pde-sim": ("pde",),
    "pipeline": None,
}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kspulse", description="Traveling-pulse analysis toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI configuration file (defaults apply when omitted)")
        p.add_argument("--out", type=Path, help="output directory (default: $KSPULSE_OUT or ./kspulse-out)")
        p.add_argument("--u-minus", type=float)
        p.add_argument("--speed", help="traveling speed or 'auto'")
        p.add_argument("--branch", choices=("above", "below"))
        if name == "certify-trap":
            p.add_argument("--samples", type=int)
            p.add_argument("--speeds", type=int)
        if name in ("shoot", "continue-eps"):
            p.add_argument("--offset", type=float)
        if name == "continue-eps":
            p.add_argument("--ladder", type=_floats)
        if name == "spectrum":
            p.add_argument("--rho", type=_floats)
            p.add_argument("--epsilon", type=_floats)
            p.add_argument("--tau-range", type=float)
        if name == "resolvent-check":
            p.add_argument("--samples", type=int)
            p.add_argument("--seed", type=int)
        if name == "pde-sim":
            p.add_argument("--nodes", type=int)
            p.add_argument("--horizon", type=float)
            p.add_argument("--epsilon", type=float)
            p.add_argument("--dump-frames", action="store_true")
    return ap


def _apply_flags(cfg: RunConfig, cmd: str, a: argparse.Namespace) -> RunConfig:
    wave = cfg.wave
    if a.u_minus is not None:
        wave = replace(wave, u_minus=a.u_minus)
    if a.speed is not None:
        try:
            wave = replace(wave, s="auto" if a.speed == "auto" else float(a.speed))
        except ValueError:
            raise ConfigError(f"--speed must be a number or 'auto', got {a.speed!r}") from None
    if a.branch is not None:
        wave = replace(wave, branch=a.branch)
    cfg = replace(cfg, wave=wave)
    if cmd == "certify-trap":
        cfg = replace(cfg, trap=replace(cfg.trap, **{k: v for k, v in (("samples", a.samples), ("speeds", a.speeds)) if v is not None}))
    if cmd in ("shoot", "continue-eps") and a.offset is not None:
        cfg = replace(cfg, orbit=replace(cfg.orbit, offset=a.offset))
    if cmd == "continue-eps" and a.ladder:
        cfg = replace(cfg, continuation=replace(cfg.continuation, ladder=a.ladder))
    if cmd == "spectrum":
        upd = {k: v for k, v in (("rho", a.rho), ("epsilons", a.epsilon), ("tau_range", a.tau_range)) if v is not None}
        cfg = replace(cfg, spectrum=replace(cfg.spectrum, **upd))
    if cmd == "resolvent-check":
        upd = {k: v for k, v in (("samples", a.samples), ("seed", a.seed)) if v is not None}
        cfg = replace(cfg, resolvent=replace(cfg.resolvent, **upd))
    if cmd == "pde-sim":
        upd = {k: v for k, v in (("nodes", a.nodes), ("horizon", a.horizon), ("epsilon", a.epsilon)) if v is not None}
        if a.dump_frames:
            upd["dump_frames"] = True
        cfg = replace(cfg, pde=replace(cfg.pde, **upd))
    stages = SUBCOMMANDS[cmd]
    if stages is not None:
        cfg = replace(cfg, stages=stages)
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_flags(cfg, args.command, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else cfg.output_dir
    report = run_pipeline(cfg, out)
    for name, st in report.stages.items():
        line = f"{name:13s} {st.status:8s}"
        if st.error:
            line += f" {st.error}"
        print(line)
    print(f"report: {Path(out) / 'report.json'}")
    return EXIT_OK if report.ok else EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
