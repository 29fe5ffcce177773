"""Command-line entry point: ``mps-attitude {run,sweep,validate}``.

Exit codes
----------
0  success
2  bad command line (argparse)
3  ConfigInvalid: unreadable/invalid configuration or unknown maneuver
4  IoFailure: output could not be written
5  DivergedState: a simulated run blew up (for sweep: any cell failed)
6  Stage3NeverEntered: a maneuver whose reference never reaches psi0

Errors are reported on stderr as a single line of ``key=value`` pairs,
e.g. ``error=ConfigInvalid field=selector.delta message="..."``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigInvalid, ExperimentConfig, IoFailure, default_config, load_config
from .harness import CONTROLLERS, DivergedState, Stage3NeverEntered, run_maneuver, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_DIVERGED = 5
EXIT_NO_STAGE3 = 6


def _error(kind: str, message: str, field: str | None = None) -> None:
    parts = [f"error={kind}"]
    if field is not None:
        parts.append(f"field={field}")
    parts.append(f"message={json.dumps(message, ensure_ascii=False)}")
    print(" ".join(parts), file=sys.stderr)


def _load(args) -> ExperimentConfig:
    cfg = default_config() if args.config is None else load_config(args.config)
    updates = {}
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ConfigInvalid("trials", "must be >= 1")
        updates["trials"] = args.trials
    return cfg.model_copy(update=updates) if updates else cfg


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out}: {exc}") from None
    return out


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"ok: {len(cfg.maneuvers)} maneuvers, controllers={','.join(cfg.controllers)}, trials={cfg.trials}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    spec = cfg.maneuver(args.maneuver)
    rec = run_maneuver(spec, args.controller, seed=cfg.seed, **cfg.run_kwargs())
    out = _outdir(cfg)
    path = out / f"{spec.label}_{args.controller}_seed{cfg.seed}.csv"
    _write(path, rec.to_csv())
    print(f"{spec.label} {args.controller}: gamma_exp={rec.gamma_exp:.6e} N^2 m^2 s, "
          f"stage3_samples={len(rec.t) - rec.stage3_index}, switches={rec.switch_count}, "
          f"final_equilibrium={rec.final_equilibrium:+d}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    summary = run_sweep(cfg.maneuver_specs(), cfg.trials, controllers=tuple(cfg.controllers),
                        seed=cfg.seed, jobs=args.jobs, keep_first_record=True, **cfg.run_kwargs())
    out = _outdir(cfg)
    _write(out / "summary.csv", summary.to_csv())
    for cell in summary.cells:
        if cell.first_record is not None:
            _write(out / f"{cell.spec.label}_{cell.controller}_seed{cfg.seed}.csv", cell.first_record.to_csv())
    table = summary.table()
    _write(out / "comparison.txt", table + "\n")
    print(table)
    failed = [c for c in summary.cells if c.failed]
    for c in failed:
        _error("CellFailed", c.error, field=f"{c.spec.label}/{c.controller}")
    return EXIT_DIVERGED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="experiment YAML (default: the shipped default config)")
    common.add_argument("--out", default=None, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=None, help="base seed (overrides config)")

    p = argparse.ArgumentParser(prog="mps-attitude", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", parents=[common], help="fly one maneuver with one controller")
    pr.add_argument("--maneuver", required=True, help="maneuver id from the config")
    pr.add_argument("--controller", choices=CONTROLLERS, default="mps")
    pr.set_defaults(func=cmd_run)

    ps = sub.add_parser("sweep", parents=[common], help="all maneuvers x controllers x trials")
    ps.add_argument("--trials", type=int, default=None, help="trials per cell (overrides config)")
    ps.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    ps.set_defaults(func=cmd_sweep)

    pv = sub.add_parser("validate", parents=[common], help="load and validate a config")
    pv.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        _error("ConfigInvalid", exc.message, field=exc.field)
        return EXIT_CONFIG
    except IoFailure as exc:
        _error("IoFailure", str(exc))
        return EXIT_IO
    except DivergedState as exc:
        _error("DivergedState", str(exc))
        return EXIT_DIVERGED
    except Stage3NeverEntered as exc:
        _error("Stage3NeverEntered", str(exc))
        return EXIT_NO_STAGE3


if __name__ == "__main__":
    sys.exit(main())
