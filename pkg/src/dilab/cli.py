"""Command-line runner: ``dilab run | convergence | list-experiments | validate``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .functionals import TailMassError
from .report import ExperimentReport, fit_order, write_atomic, write_report

EXIT_PASS, EXIT_FAIL, EXIT_SCHEMA, EXIT_TAIL, EXIT_NUMERIC = 0, 1, 2, 3, 4

AXES = {"N": "N", "dt": "dt", "T": "T", "eps": "eps"}


def _execute(cfg: ExperimentConfig) -> tuple[ExperimentReport, int]:
    from .experiments import STUDIES

    study = STUDIES[cfg.experiment]
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    try:
        study.run(cfg, rep)
    except TailMassError as exc:
        rep.error = f"tail-mass breach: {exc}"
        return rep, EXIT_TAIL
    except ConfigError:
        raise
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        rep.error = f"numerical failure: {type(exc).__name__}: {exc}"
        return rep, EXIT_NUMERIC
    return rep, EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    rep, code = _execute(cfg)
    out = Path(args.out or cfg.output.directory)
    write_report(rep, out, cfg.output.formats)
    for line in rep.summary_lines():
        print(line)
    if rep.error:
        print(rep.error, file=sys.stderr)
    print(f"{cfg.experiment}: {'PASS' if code == 0 else 'FAIL'} ({rep.wall_clock:.2f} s) -> {out}")
    return code


def _step_of(axis: str, value: float, cfg: ExperimentConfig) -> float:
    if axis == "N":
        g = cfg.grid
        return (2 * g.L if g.mode == "cartesian" else g.L) / value
    return float(value)


def cmd_convergence(args) -> int:
    base = load_config(args.config, args.set)
    axis = args.axis
    ladder = getattr(base.sweep, axis)
    if not ladder or len(ladder) < 2:
        raise ConfigError(f"convergence along {axis} needs sweep.{axis} with at least two entries")
    raw = base.echo()
    points = []
    for value in ladder:
        point = json.loads(json.dumps(raw))
        point["sweep"][axis] = [value]
        if axis == "N":
            point["grid"]["N"] = int(value)
            point["sweep"]["N"] = None
        point["sweep"] = {k: v for k, v in point["sweep"].items() if v is not None}
        cfg = parse_config(point)
        rep, code = _execute(cfg)
        if code in (EXIT_TAIL, EXIT_NUMERIC):
            print(rep.error, file=sys.stderr)
            return code
        err = rep.scalars.get("error")
        if err is None:
            raise ConfigError(f"{base.experiment} does not report an error metric")
        points.append((value, float(err)))
        print(f"{axis}={value:g}: error {err:.6e}")
    fit = fit_order([_step_of(axis, v, base) for v, _ in points], [e for _, e in points])
    fit.update(axis=axis, experiment=base.experiment, ladder=[v for v, _ in points])
    out = Path(args.out or base.output.directory)
    write_atomic(out / f"convergence_{axis}.json", json.dumps(fit, indent=2, sort_keys=True) + "\n")
    flags = ", ".join(fit["flags"]) or "none"
    print(f"order {fit['order']:.4f}  R2 {fit['r2']:.6f}  flags: {flags}")
    return EXIT_PASS


def cmd_list(args) -> int:
    from .experiments import STUDIES

    for name, study in STUDIES.items():
        print(f"{name:26s} {study.summary}")
    return EXIT_PASS


def cmd_validate(args) -> int:
    cfg = load_config(args.config, args.set)
    print(f"{args.config}: valid {cfg.experiment} config")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dilab", description="Dispersive identity lab")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("config")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        return sp

    r = with_config(sub.add_parser("run", help="run one experiment"))
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)
    c = with_config(sub.add_parser("convergence", help="fit an observed order along a sweep axis"))
    c.add_argument("--axis", choices=sorted(AXES), default="N")
    c.add_argument("--out")
    c.set_defaults(func=cmd_convergence)
    sub.add_parser("list-experiments", help="list study names").set_defaults(func=cmd_list)
    with_config(sub.add_parser("validate", help="check a config without computing")).set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
