"""Run configuration: INI sections parsed into frozen dataclasses."""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError

OUTPUT_ENV = "KSPULSE_OUT"
DEFAULT_OUTPUT = "kspulse-out"
STAGES = ("equilibria", "window", "trap", "shoot", "continuation", "spectrum", "resolvent", "pde")


@dataclass(frozen=True)
class WaveSection:
    u_minus: float = 1.25
    branch: str = "above"
    s: float | str = "auto"


@dataclass(frozen=True)
class TrapSection:
    margin: float = 0.5
    samples: int = 10_000
    speeds: int = 10


@dataclass(frozen=True)
class OrbitSection:
    offset: float = 1e-7
    rtol: float = 1e-10
    atol: float = 1e-12
    event_tol: float = 1e-6
    max_step: float = 1.0
    max_length: float = 1e4
    hausdorff_nodes: int = 512


@dataclass(frozen=True)
class ContinuationSection:
    ladder: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    slope_low: float = 0.7
    slope_high: float = 1.3
    defect_spread: float = 2.0


@dataclass(frozen=True)
class SpectrumSection:
    epsilons: tuple[float, ...] = (1e-2, 1e-3)
    rho: tuple[float, ...] = (0.0, 0.01, 0.0316227766016838, 0.1, 0.316227766016838, 1.0, 3.16227766016838, 10.0)
    tau_range: float = 2.0
    tau_points: int = 401


@dataclass(frozen=True)
class ResolventSection:
    epsilon: float = 0.1
    samples: int = 10
    seed: int = 0
    spacing: float = 1e-2
    half_span: float = 30.0
    re_min: float = 1.0
    re_max: float = 1e3


@dataclass(frozen=True)
class PDESection:
    epsilon: float = 0.1
    nodes: int = 4096
    widths: float = 40.0
    horizon: float = 1.0
    dt: float = 5e-3
    frames: int = 20
    speed_tol: float = 0.05
    growth_amplitude: float = 1e-8
    growth_horizon: float = 3.0
    growth_dt: float = 2e-3
    dump_frames: bool = False


@dataclass(frozen=True)
class RunConfig:
    family: str = "tanh-quadratic"
    model_params: tuple[tuple[str, float], ...] = ()
    wave: WaveSection = field(default_factory=WaveSection)
    trap: TrapSection = field(default_factory=TrapSection)
    orbit: OrbitSection = field(default_factory=OrbitSection)
    continuation: ContinuationSection = field(default_factory=ContinuationSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    resolvent: ResolventSection = field(default_factory=ResolventSection)
    pde: PDESection = field(default_factory=PDESection)
    stages: tuple[str, ...] = STAGES
    output: str = ""

    @property
    def output_dir(self) -> Path:
        return Path(self.output or os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))

    def model_kwargs(self) -> dict:
        return dict(self.model_params)

    def enabled(self, stage: str) -> bool:
        return stage in self.stages


_SECTIONS = {
    "wave": WaveSection,
    "trap": TrapSection,
    "orbit": OrbitSection,
    "continuation": ContinuationSection,
    "spectrum": SpectrumSection,
    "resolvent": ResolventSection,
    "pde": PDESection,
}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _parse_value(default, raw: str, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if isinstance(default, str) and default == "auto":  # speed: number or "auto"
            return "auto" if raw.lower() == "auto" else float(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].strip() == key:
            return n
    return None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse INI text; unknown sections or keys and bad values raise :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    def where(section: str, key: str) -> str:
        line = _line_of(text, section, key)
        return f"{source}:{line} [{section}] {key}" if line else f"{source} [{section}] {key}"

    cfg = RunConfig()
    known = {"model", "run", *_SECTIONS}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"{source}: unknown section [{section}]")

    if cp.has_section("model"):
        items = dict(cp.items("model"))
        family = items.pop("family", cfg.family)
        params = []
        for k, raw in items.items():
            params.append((k, _parse_value(0.0, raw, where("model", k))))
        cfg = replace(cfg, family=family, model_params=tuple(params))

    for name, cls in _SECTIONS.items():
        if not cp.has_section(name):
            continue
        current = getattr(cfg, name)
        names = {f.name for f in fields(cls)}
        updates = {}
        for k, raw in cp.items(name):
            if k not in names:
                raise ConfigError(f"{where(name, k)}: unknown key")
            updates[k] = _parse_value(getattr(current, k), raw, where(name, k))
        cfg = replace(cfg, **{name: replace(current, **updates)})

    if cp.has_section("run"):
        for k, raw in cp.items("run"):
            if k == "stages":
                stages = tuple(s.strip() for s in raw.split(",") if s.strip())
                if stages == ("all",):
                    stages = STAGES
                bad = [s for s in stages if s not in STAGES]
                if bad:
                    raise ConfigError(f"{where('run', k)}: unknown stage(s) {bad}; known: {list(STAGES)}")
                cfg = replace(cfg, stages=stages)
            elif k == "output":
                cfg = replace(cfg, output=raw.strip())
            else:
                raise ConfigError(f"{where('run', k)}: unknown key")
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, str(p))


def validate(cfg: RunConfig) -> None:
    if cfg.wave.branch not in ("above", "below"):
        raise ConfigError(f"[wave] branch must be 'above' or 'below', got {cfg.wave.branch!r}")
    if not 0.0 < cfg.trap.margin < 1.0:
        raise ConfigError("[trap] margin must lie in (0, 1)")
    if cfg.trap.samples < 3 or cfg.trap.speeds < 1:
        raise ConfigError("[trap] samples must be >= 3 and speeds >= 1")
    if any(not (e > 0.0 and math.isfinite(e)) for e in cfg.continuation.ladder):
        raise ConfigError("[continuation] ladder entries must be positive")
    if any(e <= 0.0 for e in cfg.spectrum.epsilons) or any(r < 0.0 for r in cfg.spectrum.rho):
        raise ConfigError("[spectrum] epsilons must be positive and rho nonnegative")
    if cfg.pde.nodes < 64:
        raise ConfigError("[pde] nodes must be >= 64")
    if cfg.pde.frames < 10:
        raise ConfigError("[pde] frames must be >= 10 for speed tracking")
    if not (cfg.resolvent.re_min > 0.0 and cfg.resolvent.re_max >= cfg.resolvent.re_min):
        raise ConfigError("[resolvent] need 0 < re_min <= re_max")


def to_ini(cfg: RunConfig) -> str:
    """Render ``cfg`` as INI text that :func:`parse_config` reads back to an equal config."""
    lines = ["[model]", f"family = {cfg.family}"]
    lines += [f"{k} = {_fmt(float(v))}" for k, v in cfg.model_params]
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        lines += ["", f"[{name}]"]
        lines += [f"{f.name} = {_fmt(getattr(sec, f.name))}" for f in fields(sec)]
    lines += ["", "[run]", f"stages = {', '.join(cfg.stages)}"]
    if cfg.output:
        lines.append(f"output = {cfg.output}")
    return "\n".join(lines) + "\n"


def as_dict(cfg: RunConfig) -> dict:
    out = {"model": {"family": cfg.family, **{k: float(v) for k, v in cfg.model_params}}}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out[name] = {f.name: (list(v) if isinstance(v := getattr(sec, f.name), tuple) else v) for f in fields(sec)}
    out["run"] = {"stages": list(cfg.stages)}
    return out


def from_dict(data: dict, source: str = "<echo>") -> RunConfig:
    """Rebuild a config from the echo written into a report (``as_dict`` output)."""
    lines = []
    for section, values in data.items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            if isinstance(v, list):
                v = tuple(v) if section != "run" else ", ".join(v)
            lines.append(f"{k} = {_fmt(v)}")
        lines.append("")
    return parse_config("\n".join(lines), source)
