"""Experiment orchestration: runs, sweeps, output files and checkpoint/resume."""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import RunConfig, emit, with_overrides
from .integrator import Checkpoint, IntegrationError, config_hash, evolve
from .observables import (PositionProbability, Recorder, TimeSeries, asymmetry,
                          envelope_amplitude, write_prob_csv)
from .state import init_coherent_excited, load_field, save_field

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
PLOT_SCRIPT = "plot_results.py"


class OutputExistsError(FileExistsError):
    pass


def build_id() -> str:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return f"nanorod {version} / numpy {np.__version__} / python {platform.python_version()}"


def run_hash(cfg: RunConfig, mode: str) -> str:
    """Hash of everything that determines a run's numbers (output location excluded)."""
    d = cfg.to_dict()
    d.pop("out", None)
    d.pop("checkpoint_every", None)
    d["mode"] = mode
    return config_hash(d)


def rabi_period(cfg: RunConfig) -> float:
    return math.pi / cfg.params.omega if cfg.params.omega > 0 else math.inf


def damping_metric(series: TimeSeries, cfg: RunConfig, fraction: float = 0.5) -> float:
    """Rabi-envelope amplitude averaged over the final `fraction` of the run."""
    t = series.column("t")
    t_end = float(t[-1])
    return envelope_amplitude(t, series.column("sigma_z"), t_end * (1 - fraction), t_end,
                              rabi_period(cfg))


# -- checkpoints ---------------------------------------------------------------

def _ckpt_dir(out: Path, mode: str) -> Path:
    return out / f"checkpoint_{mode}"


def write_checkpoint(directory: Path, ck: Checkpoint, cfg_hash: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    tmp = directory.with_name(directory.name + ".tmp")
    tmp.mkdir(parents=True, exist_ok=True)
    save_field(tmp / "field.bin", ck.field,
               {"t": ck.t, "step": ck.step, "dt": ck.dt, "config_hash": cfg_hash})
    ck.series.to_csv(tmp / "series.csv", provenance=True)
    snaps = ck.series.snapshots
    named = ck.series.named_snapshots
    n_r = ck.field.grid.n_r

    def stack(items):
        return np.array([s.values for s in items], dtype=float).reshape(len(items), n_r)

    np.savez(tmp / "snapshots.npz",
             avg_t=np.array([s.t for s in snaps], dtype=float), avg=stack(snaps),
             named_t=np.array([s.t for s in named], dtype=float), named=stack(named))
    for f in tmp.iterdir():
        f.replace(directory / f.name)
    tmp.rmdir()


def read_checkpoint(directory: Path, expected_hash: str | None = None) -> Checkpoint:
    directory = Path(directory)
    W, header = load_field(directory / "field.bin")
    if expected_hash is not None and header.get("config_hash") != expected_hash:
        raise ValueError(f"checkpoint {directory} was written for a different configuration "
                         f"({header.get('config_hash')} != {expected_hash})")
    series = TimeSeries.from_csv(directory / "series.csv")
    with np.load(directory / "snapshots.npz") as z:
        series.snapshots = [PositionProbability(v.copy(), W.grid, float(t))
                            for t, v in zip(z["avg_t"], z["avg"])]
        series.named_snapshots = [PositionProbability(v.copy(), W.grid, float(t))
                                  for t, v in zip(z["named_t"], z["named"])]
    return Checkpoint(int(header["step"]), float(header["t"]), W, series, float(header["dt"]))


# -- single run -----------------------------------------------------------------

@dataclass
class ModeResult:
    mode: str
    series: TimeSeries | None = None
    status: str = "ok"
    error: str | None = None
    wall_seconds: float = 0.0
    files: list = field(default_factory=list)


@dataclass
class RunResult:
    config: RunConfig
    out: Path
    results: dict

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.results.values())


def _prepare_out(out: Path, force: bool, resume: bool) -> None:
    if out.exists() and any(out.iterdir()) and not (force or resume):
        raise OutputExistsError(f"{out} already holds results; pass force to overwrite")
    out.mkdir(parents=True, exist_ok=True)


def run(cfg: RunConfig, force: bool = False, resume: bool = False,
        out: str | Path | None = None) -> RunResult:
    """Evolve each requested mode, writing CSVs, manifest and plot script into the output dir.

    Solver failures are caught, recorded in the manifest, and partial series kept.
    With `resume`, each mode restarts from its checkpoint directory if one exists.
    """
    out = Path(out if out is not None else cfg.out)
    _prepare_out(out, force, resume)
    W0 = init_coherent_excited(cfg.grid, cfg.initial.R0, cfg.initial.P0, cfg.initial.deltaR)
    results = {}
    for mode in cfg.modes():
        results[mode] = _run_mode(cfg, mode, W0, out, resume)
    write_manifest(out, cfg, results)
    write_plot_script(out, list(results))
    return RunResult(cfg, out, results)


def _run_mode(cfg: RunConfig, mode: str, W0, out: Path, resume: bool) -> ModeResult:
    params = cfg.params_for(mode)
    h = run_hash(cfg, mode)
    ck_dir = _ckpt_dir(out, mode)
    recorder = Recorder(params, snapshot_every=cfg.snapshot_stride(),
                        snapshot_times=cfg.snapshot_times,
                        time_tol=0.25 * cfg.integrator.dt)
    start = None
    if resume and (ck_dir / "field.bin").exists():
        start = read_checkpoint(ck_dir, h)
        log.info("%s: resuming from t=%.6g (step %d)", mode, start.t, start.step)

    def on_checkpoint(ck):
        write_checkpoint(ck_dir, ck, h)

    res = ModeResult(mode)
    t0 = time.perf_counter()
    try:
        res.series = evolve(W0, params, cfg.integrator, recorder=recorder,
                            checkpoint_every=cfg.checkpoint_every,
                            on_checkpoint=on_checkpoint if cfg.checkpoint_every else None,
                            resume=start)
    except IntegrationError as exc:
        res.status, res.error = "failed", str(exc)
        res.series = exc.series
        log.error("%s run failed: %s", mode, exc)
    res.wall_seconds = time.perf_counter() - t0
    if res.series is not None and len(res.series):
        res.files = write_mode_outputs(out, mode, res.series)
    return res


def _tag(t: float) -> str:
    return f"{t:.6f}".replace(".", "p")


def write_mode_outputs(out: Path, mode: str, series: TimeSeries) -> list[str]:
    files = [f"timeseries_{mode}.csv"]
    series.to_csv(out / files[0])
    for snap in series.named_snapshots:
        name = f"prob_R_{mode}_t{_tag(snap.t)}.csv"
        write_prob_csv(out / name, snap)
        files.append(name)
    if series.snapshots:
        name = f"prob_R_avg_{mode}.csv"
        write_prob_csv(out / name, series.time_averaged_prob())
        files.append(name)
    return files


def _diagnostics(series: TimeSeries) -> dict:
    if series is None or not len(series):
        return {}
    norm = series.column("norm")
    energy = series.column("energy")
    d = {
        "t_final": series.t[-1],
        "records": len(series),
        "sigma_z_final": series.sigma_z[-1],
        "prob_left_final": series.prob_left[-1],
        "norm_drift_max": float(np.max(np.abs(norm - norm[0]))),
        "energy_drift_max": float(np.max(np.abs(energy - energy[0]))),
        "hermiticity_defect_max": float(np.max(series.column("hermiticity_defect"))),
        "boundary_mass_max": float(np.max(series.column("boundary_mass"))),
    }
    if series.snapshots:
        d["asymmetry_time_averaged"] = asymmetry(series.time_averaged_prob())
    return d


def write_manifest(out: Path, cfg: RunConfig, results: dict) -> Path:
    manifest = {
        "build": build_id(),
        "config": cfg.to_dict(),
        "config_text": emit(cfg),
        "runs": {
            mode: {
                "status": r.status,
                "error": r.error,
                "config_hash": run_hash(cfg, mode),
                "wall_seconds": r.wall_seconds,
                "files": r.files,
                "diagnostics": _diagnostics(r.series),
            }
            for mode, r in results.items()
        },
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def config_from_manifest(path) -> RunConfig:
    """Rebuild the exact configuration recorded in a manifest."""
    from .config import load_config, parse_text, build_config

    data = json.loads(Path(path).read_text())
    return build_config(parse_text(data["config_text"], str(path)))


_PLOT_TEMPLATE = '''"""Plots for the run in this directory. Requires matplotlib (not a dependency of nanorod)."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
MODES = {modes!r}
STYLE = {{"classical": "--", "quantum": "-"}}


def read(name):
    with open(HERE / name) as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}} if rows else {{}}


fig, axes = plt.subplots(3, 1, figsize=(7, 10))
for mode in MODES:
    ts = read(f"timeseries_{{mode}}.csv")
    if not ts:
        continue
    axes[0].plot(ts["t"], ts["sigma_z"], STYLE.get(mode, "-"), label=mode)
    axes[1].plot(ts["t"], ts["prob_left"], STYLE.get(mode, "-"), label=mode)
    avg = HERE / f"prob_R_avg_{{mode}}.csv"
    if avg.exists():
        p = read(avg.name)
        axes[2].plot(p["R"], p["value"], STYLE.get(mode, "-"), label=mode)
axes[0].set_xlabel("t")
axes[0].set_ylabel("<sigma_z>")
axes[1].set_xlabel("t")
axes[1].set_ylabel("Prob_L")
axes[2].set_xlabel("R")
axes[2].set_ylabel("time-averaged Prob(R)")
for ax in axes:
    ax.legend()
fig.tight_layout()
fig.savefig(HERE / "figures.png", dpi=150)
'''


def write_plot_script(out: Path, modes: list[str]) -> Path:
    path = out / PLOT_SCRIPT
    path.write_text(_PLOT_TEMPLATE.format(modes=modes))
    return path


# -- sweeps -----------------------------------------------------------------------

SUMMARY_COLUMNS = ("c", "status", "damping_classical", "damping_quantum",
                   "asymmetry_classical", "asymmetry_quantum")


def sweep(cfg: RunConfig, c_values, force: bool = False, out: str | Path | None = None) -> Path:
    """One run directory per coupling, plus summary.csv. Failures are isolated and marked."""
    values = [float(c) for c in c_values]
    if not values:
        raise ValueError("sweep needs at least one coupling value")
    root = Path(out if out is not None else cfg.out)
    _prepare_out(root, force, resume=False)
    rows = []
    for c in values:
        row = {k: "" for k in SUMMARY_COLUMNS}
        row["c"] = repr(c)
        try:
            sub = with_overrides(cfg, c=c, out=str(root / f"c_{c:g}"))
            res = run(sub, force=force)
            row["status"] = "ok" if res.ok else "failed"
            for mode, r in res.results.items():
                if r.series is None or not len(r.series):
                    continue
                try:
                    row[f"damping_{mode}"] = repr(damping_metric(r.series, sub))
                except ValueError:
                    pass
                if r.series.snapshots:
                    row[f"asymmetry_{mode}"] = repr(asymmetry(r.series.time_averaged_prob()))
        except Exception as exc:  # noqa: BLE001 - one bad coupling must not sink the sweep
            log.error("sweep entry c=%g failed: %s", c, exc)
            row["status"] = f"failed: {exc}".replace("\n", " ")
        rows.append(row)
    path = root / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return path
