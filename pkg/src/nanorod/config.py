"""Run configuration: a flat ``key = value`` text format, presets and validation.

Example::

    # set 1 with the stronger coupling
    preset = set1
    c = 0.6
    mode = both
    out = runs/set1_c06

Lines starting with ``#`` are comments. Unknown keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .grid import PhaseGrid, build_grid
from .integrator import IntegratorConfig
from .model import Mode, ModelParams

RUN_MODES = ("classical", "quantum", "both")
DEFAULT_SNAPSHOT_DT = 0.05


class ConfigError(ValueError):
    """Raised with every problem found in a configuration, one per line."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass(frozen=True)
class InitialState:
    R0: float
    P0: float = 0.0
    deltaR: float = 0.6071


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    grid: PhaseGrid
    initial: InitialState
    integrator: IntegratorConfig
    run_mode: str = "both"
    out: str = "run"
    snapshot_times: tuple = ()
    snapshot_dt: float = DEFAULT_SNAPSHOT_DT
    checkpoint_every: int = 0
    preset: str | None = None
    seed: int = 0

    def modes(self) -> list[str]:
        return ["classical", "quantum"] if self.run_mode == "both" else [self.run_mode]

    def params_for(self, mode: str) -> ModelParams:
        return self.params.with_mode(mode)

    def observe_dt(self) -> float:
        return self.integrator.dt * self.integrator.observe_every

    def snapshot_stride(self) -> int:
        """Number of observations between time-average snapshots."""
        return max(1, int(round(self.snapshot_dt / self.observe_dt())))

    def to_text(self) -> str:
        return emit(self)

    def to_dict(self) -> dict:
        return dict(_flatten(self))


# -- presets ------------------------------------------------------------------

# Dimensionless parameters as printed for the two published parameter sets.
# Grid extents and set-2 observation settings are local choices.
PRESETS = {
    "set1": {
        "omega": 0.6, "c": 0.4, "b2": -1.0, "b4": 0.5,
        "R0": -1.6, "P0": 0.0, "deltaR": 0.6071,
        "dt": 1e-4, "t_end": 10.0,
        "r_min": -5.0, "r_max": 5.0, "p_min": -10.0, "p_max": 10.0, "n_r": 120, "n_p": 120,
    },
    "set2": {
        "omega": 0.6, "c": 0.1, "b2": -0.01, "b4": 0.0004,
        "R0": -7.0, "P0": 0.0, "deltaR": 0.6071,
        "dt": 1e-4, "t_end": 18.0,
        "r_min": -16.0, "r_max": 16.0, "p_min": -4.0, "p_max": 4.0, "n_r": 120, "n_p": 120,
    },
}

DEFAULTS = {
    "mode": "both",
    "integrator": "fixed",
    "abs_tol": 1e-8,
    "rel_tol": 1e-6,
    "max_steps": 10_000_000,
    "observe_every": 100,
    "snapshot_dt": DEFAULT_SNAPSHOT_DT,
    "snapshot_times": "",
    "checkpoint_every": 0,
    "out": "run",
    "seed": 0,
    "P0": 0.0,
    "deltaR": 0.6071,
}

_FLOAT = {"omega", "c", "b2", "b4", "R0", "P0", "deltaR", "dt", "t_end", "r_min", "r_max",
          "p_min", "p_max", "abs_tol", "rel_tol", "snapshot_dt"}
_INT = {"n_r", "n_p", "max_steps", "observe_every", "checkpoint_every", "seed"}
_STR = {"preset", "mode", "integrator", "out", "snapshot_times"}
KEYS = _FLOAT | _INT | _STR

# emission order
_ORDER = ("preset", "omega", "c", "b2", "b4", "mode",
          "r_min", "r_max", "p_min", "p_max", "n_r", "n_p",
          "R0", "P0", "deltaR",
          "integrator", "dt", "t_end", "abs_tol", "rel_tol", "max_steps", "observe_every",
          "snapshot_dt", "snapshot_times", "checkpoint_every", "out", "seed")


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict of raw strings."""
    raw, problems = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
        elif key in raw:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
        else:
            raw[key] = value
    if problems:
        raise ConfigError(problems)
    return raw


def _convert(raw: dict) -> tuple[dict, list[str]]:
    vals, problems = {}, []
    for key, value in raw.items():
        if key in _FLOAT:
            try:
                vals[key] = float(value)
            except (TypeError, ValueError):
                problems.append(f"{key}: expected a number, got {value!r}")
        elif key in _INT:
            try:
                f = float(value)
                if not f.is_integer():
                    raise ValueError
                vals[key] = int(f)
            except (TypeError, ValueError, OverflowError):
                problems.append(f"{key}: expected an integer, got {value!r}")
        else:
            vals[key] = str(value)
    return vals, problems


def _parse_times(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def build_config(values: dict) -> RunConfig:
    """Validate merged key/value settings (preset, defaults, overrides) into a RunConfig."""
    raw = dict(values)
    preset = raw.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError([f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}"])
    merged = dict(DEFAULTS)
    if preset is not None:
        merged.update(PRESETS[preset])
    merged.update({k: v for k, v in raw.items() if v is not None})
    unknown = sorted(set(merged) - KEYS)
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in unknown])
    vals, problems = _convert({k: v for k, v in merged.items()})

    required = ("omega", "c", "b2", "b4", "R0", "dt", "t_end",
                "r_min", "r_max", "p_min", "p_max", "n_r", "n_p")
    problems += [f"{k}: missing (no preset supplies it)" for k in required if k not in vals]
    for k in _FLOAT & vals.keys():
        if not math.isfinite(vals[k]):
            problems.append(f"{k}: must be finite, got {vals[k]}")
    if problems:
        raise ConfigError(problems)

    if vals["mode"] not in RUN_MODES:
        problems.append(f"mode: expected one of {RUN_MODES}, got {vals['mode']!r}")
    try:
        snapshot_times = _parse_times(vals["snapshot_times"])
    except ValueError:
        snapshot_times = ()
        problems.append(f"snapshot_times: expected comma-separated numbers, got {vals['snapshot_times']!r}")

    params = grid = integ = None
    try:
        params = ModelParams(vals["omega"], vals["c"], vals["b2"], vals["b4"], Mode.QUANTUM)
    except ValueError as exc:
        problems.append(f"model: {exc}")
    try:
        grid = build_grid(vals["r_min"], vals["r_max"], vals["p_min"], vals["p_max"],
                          vals["n_r"], vals["n_p"])
    except ValueError as exc:
        problems.append(f"grid: {exc}")
    try:
        integ = IntegratorConfig(dt=vals["dt"], t_end=vals["t_end"], mode=vals["integrator"],
                                 abs_tol=vals["abs_tol"], rel_tol=vals["rel_tol"],
                                 max_steps=vals["max_steps"], observe_every=vals["observe_every"])
    except ValueError as exc:
        problems.append(f"integrator: {exc}")

    init = InitialState(vals["R0"], vals["P0"], vals["deltaR"])
    if not init.deltaR > 0:
        problems.append(f"deltaR: must be positive, got {init.deltaR}")
    if grid is not None:
        margin = 4.0 * init.deltaR
        if not grid.r_min + margin <= init.R0 <= grid.r_max - margin:
            problems.append(f"R0: {init.R0} is within {margin:.4g} of the R extent "
                            f"[{grid.r_min}, {grid.r_max}]")
        if not grid.p_min + margin <= init.P0 <= grid.p_max - margin:
            problems.append(f"P0: {init.P0} is within {margin:.4g} of the P extent "
                            f"[{grid.p_min}, {grid.p_max}]")
        if not grid.r_min < 0 < grid.r_max:
            problems.append("grid: R extent must straddle 0 for the left-well occupation")
    if integ is not None:
        for ts in snapshot_times:
            if not 0 <= ts <= integ.t_end:
                problems.append(f"snapshot_times: {ts} outside [0, t_end={integ.t_end}]")
            elif integ.mode == "fixed":
                k = ts / (integ.dt * integ.observe_every)
                if abs(k - round(k)) > 1e-6:
                    problems.append(f"snapshot_times: {ts} is not an observation time "
                                    f"(multiple of dt*observe_every = {integ.dt * integ.observe_every:g})")
        if not vals["snapshot_dt"] > 0:
            problems.append(f"snapshot_dt: must be positive, got {vals['snapshot_dt']}")
    if vals["checkpoint_every"] < 0:
        problems.append("checkpoint_every: must be >= 0")
    if problems:
        raise ConfigError(problems)

    return RunConfig(params=params, grid=grid, initial=init, integrator=integ,
                     run_mode=vals["mode"], out=vals["out"], snapshot_times=snapshot_times,
                     snapshot_dt=vals["snapshot_dt"], checkpoint_every=vals["checkpoint_every"],
                     preset=preset, seed=vals["seed"])


def load_config(source, overrides: dict | None = None) -> RunConfig:
    """Load a config from a preset name or a file path, then apply overrides."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if isinstance(source, str) and source in PRESETS:
        raw = {"preset": source}
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError([f"{source}: neither a preset ({', '.join(sorted(PRESETS))}) "
                               "nor a readable file"])
        raw = parse_text(path.read_text(), str(path))
    unknown = sorted(set(overrides) - KEYS)
    if unknown:
        raise ConfigError([f"unknown override {k!r}" for k in unknown])
    raw.update({k: str(v) if not isinstance(v, str) else v for k, v in overrides.items()})
    return build_config(raw)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _flatten(cfg: RunConfig):
    p, g, i, n = cfg.params, cfg.grid, cfg.initial, cfg.integrator
    yield "preset", cfg.preset
    yield from (("omega", p.omega), ("c", p.c), ("b2", p.b2), ("b4", p.b4), ("mode", cfg.run_mode))
    yield from (("r_min", g.r_min), ("r_max", g.r_max), ("p_min", g.p_min), ("p_max", g.p_max),
                ("n_r", g.n_r), ("n_p", g.n_p))
    yield from (("R0", i.R0), ("P0", i.P0), ("deltaR", i.deltaR))
    yield from (("integrator", n.mode), ("dt", n.dt), ("t_end", n.t_end), ("abs_tol", n.abs_tol),
                ("rel_tol", n.rel_tol), ("max_steps", n.max_steps),
                ("observe_every", n.observe_every))
    yield "snapshot_dt", cfg.snapshot_dt
    yield "snapshot_times", ",".join(repr(float(t)) for t in cfg.snapshot_times)
    yield from (("checkpoint_every", cfg.checkpoint_every), ("out", cfg.out), ("seed", cfg.seed))


def emit(cfg: RunConfig) -> str:
    """Serialize to the text format; every value is written in full precision."""
    lines = []
    for key, value in _flatten(cfg):
        if value is None:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    """Rebuild a config with some keys changed, revalidating everything."""
    values = dict(_flatten(cfg))
    values = {k: v for k, v in values.items() if v is not None}
    values.update(changes)
    return build_config({k: _fmt(v) if not isinstance(v, str) else v for k, v in values.items()})
