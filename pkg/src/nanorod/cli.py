"""Command-line entry point: ``nanorod {run,sweep,oracle,validate-config}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, load_config
from .runner import OutputExistsError, run, sweep

log = logging.getLogger("nanorod")


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="key = value configuration file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="published parameter set")
    p.add_argument("--c", type=float, help="spin-oscillator coupling (overrides config)")
    p.add_argument("--mode", choices=("classical", "quantum", "both"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--t-end", type=float, dest="t_end", help="final time (overrides config)")
    p.add_argument("--seed", type=int, help="random seed for trajectory sampling")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args):
    source = args.config if args.config is not None else (args.preset or "set1")
    overrides = {"c": args.c, "mode": args.mode, "out": args.out, "t_end": args.t_end,
                 "seed": args.seed}
    if getattr(args, "checkpoint_every", None) is not None:
        overrides["checkpoint_every"] = args.checkpoint_every
    return load_config(str(source), overrides)


def cmd_run(args) -> int:
    cfg = _config(args)
    res = run(cfg, force=args.force, resume=args.resume)
    for mode, r in res.results.items():
        print(f"{mode}: {r.status} ({r.wall_seconds:.1f} s){'  ' + r.error if r.error else ''}")
    print(f"outputs in {res.out}")
    return 0 if res.ok else 1


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()] if args.values else []
    if not values:
        print("sweep: give at least one coupling with --values", file=sys.stderr)
        return 2
    path = sweep(cfg, values, force=args.force)
    print(f"summary written to {path}")
    return 0


def cmd_oracle(args) -> int:
    from .oracle import FockSpec, classical_trajectory_oracle, oracle_evolve, oracle_initial_state

    cfg = _config(args)
    out = Path(cfg.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise OutputExistsError(f"{out} already holds results; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    t_end = cfg.integrator.t_end
    if args.kind == "fock":
        spec = FockSpec(args.n_levels)
        rho0 = oracle_initial_state(cfg.initial.R0, cfg.initial.P0, cfg.initial.deltaR, spec)
        series = oracle_evolve(rho0, cfg.params, args.dt, t_end, observe_dt=args.observe_dt)
    else:
        series = classical_trajectory_oracle(cfg.initial.R0, cfg.initial.P0, cfg.initial.deltaR,
                                             cfg.params, args.samples, args.dt or 5e-3, t_end,
                                             observe_dt=args.observe_dt, seed=cfg.seed)
    path = out / f"timeseries_oracle_{args.kind}.csv"
    series.to_csv(path, provenance=True)
    print(f"oracle series written to {path}")
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    sys.stdout.write(cfg.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nanorod", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evolve one configuration")
    _add_common(p)
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every",
                   help="write a checkpoint every N steps")
    p.add_argument("--resume", action="store_true", help="continue from checkpoints in --out")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a list of couplings")
    _add_common(p)
    p.add_argument("--values", help="comma-separated coupling values, e.g. 0.4,0.6")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="run a reference solver")
    _add_common(p)
    p.add_argument("--kind", choices=("fock", "trajectory"), default="fock")
    p.add_argument("--n-levels", type=int, default=60, dest="n_levels")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=None, help="step size (default: automatic)")
    p.add_argument("--observe-dt", type=float, default=0.1, dest="observe_dt")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate-config", help="check a configuration and print it normalized")
    _add_common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for line in exc.problems:
            print(f"  {line}", file=sys.stderr)
        return 2
    except (OutputExistsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
