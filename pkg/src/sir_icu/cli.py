"""Command-line front end.

Every subcommand writes CSV/JSON files into ``--out`` and prints a JSON
summary on stdout. Exit status is 0 on success, 1 on invalid input and 2 when
a numerical procedure fails; errors are reported as JSON on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as config_mod
from .control import optimize_switching_time
from .dynamics import ControlSchedule, running_cost, simulate
from .errors import NumericalError, ValidationError
from .experiments import (
    DEFAULT_HORIZONS,
    DEFAULT_RATIOS,
    ScenarioSpec,
    coincidence_threshold,
    run_reference_scenarios,
    successive_differences,
    sweep_horizon,
    sweep_lambda,
)
from .output import _jsonable, emit_curves_csv, emit_rows_csv, emit_trajectory_csv, write_json
from .pontryagin import verify_candidate
from .viability import RegionLabel, classify, reach_time_A, switching_point

SUBCOMMANDS = ("simulate", "viability", "optimize", "verify", "sweep-lambda", "sweep-horizon", "scenario")


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _key_value(text: str) -> tuple:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1), not argparse's default 2
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sir-icu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value scenario file (reference scenario if omitted)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")

    sim = sub.add_parser("simulate", parents=[common], help="integrate one control schedule")
    sim.add_argument("--t-star", type=float, default=None,
                     help="switch from v_max to 0 at this time (default: constant --level)")
    sim.add_argument("--level", type=float, default=None, help="constant control level (default v_max)")
    sub.add_parser("viability", parents=[common], help="safe/viable boundaries and region of x0")
    sub.add_parser("optimize", parents=[common], help="optimal switching time")
    ver = sub.add_parser("verify", parents=[common], help="optimise, then check the necessary conditions")
    ver.add_argument("--verify-dt", type=float, default=None, help="step used for the costate check")
    sl = sub.add_parser("sweep-lambda", parents=[common], help="sweep lambda_i / lambda_v")
    sl.add_argument("--ratios", type=_float_list, default=list(DEFAULT_RATIOS))
    sh = sub.add_parser("sweep-horizon", parents=[common], help="sweep the horizon T")
    sh.add_argument("--horizons", type=_float_list, default=list(DEFAULT_HORIZONS))
    sub.add_parser("scenario", parents=[common], help="the four reference weightings with verification")
    return parser


def _load(args):
    overrides = dict(args.overrides)
    if args.config is not None:
        return config_mod.parse_config(args.config, overrides)
    values = config_mod.apply_overrides({}, overrides)
    return config_mod.build(values, "default")


def cmd_simulate(args, params, x0, cfg, spec, out: Path) -> dict:
    T = params.horizon_T
    if args.t_star is not None:
        schedule = ControlSchedule.bang_bang(args.t_star, params.v_max, T)
    else:
        level = params.v_max if args.level is None else args.level
        schedule = ControlSchedule.constant(level, T)
    traj = simulate(x0, schedule, params, cfg)
    emit_trajectory_csv(traj, out / "trajectory.csv")
    return {
        "cost": running_cost(traj, params),
        "max_i": traj.max_i,
        "herd_time": traj.herd_time,
        "contact_times": list(traj.contact_times),
        "final_state": [float(traj.s[-1]), float(traj.i[-1])],
    }


def cmd_viability(args, params, x0, cfg, spec, out: Path) -> dict:
    emit_curves_csv(params, out / "curves.csv")
    label = classify(x0, params)
    summary = {"region": label.value, "sigma": params.sigma}
    if label is RegionLabel.BminusA and params.v_max > 0:
        sp = switching_point(x0, params)
        summary["switching_point"] = [sp.s_star, sp.i_star]
    if label.in_B:
        summary["t_A"] = reach_time_A(x0, params, cfg)
    return summary


def cmd_optimize(args, params, x0, cfg, spec, out: Path) -> dict:
    res = optimize_switching_time(x0, params, cfg)
    emit_trajectory_csv(res.trajectory, out / "trajectory.csv")
    return res.summary()


def cmd_verify(args, params, x0, cfg, spec, out: Path) -> dict:
    res = optimize_switching_time(x0, params, cfg)
    vcfg = cfg if args.verify_dt is None else cfg.replace(dt=args.verify_dt)
    report = verify_candidate(res, params, vcfg)
    write_json(report.to_dict(), out / "verification.json")
    return {"t_star": res.t_star, "verification": report.to_dict()}


def cmd_sweep_lambda(args, params, x0, cfg, spec, out: Path) -> dict:
    rows = sweep_lambda(args.ratios, spec, cfg)
    emit_rows_csv(rows, out / "sweep_lambda.csv")
    return {
        "rows": [r.to_dict() for r in rows],
        "coincidence_threshold": coincidence_threshold(rows, params.horizon_T),
    }


def cmd_sweep_horizon(args, params, x0, cfg, spec, out: Path) -> dict:
    hspec = ScenarioSpec(spec.name, params, x0, spec.lambda_ratio, tuple(sorted(args.horizons)))
    rows = sweep_horizon(hspec, cfg)
    emit_rows_csv(rows, out / "sweep_horizon.csv")
    return {"rows": [r.to_dict() for r in rows], "successive_differences": successive_differences(rows)}


def cmd_scenario(args, params, x0, cfg, spec, out: Path) -> dict:
    results = run_reference_scenarios(cfg, x0=x0, base=params)
    emit_curves_csv(params, out / "curves.csv")
    for name, r in results.items():
        emit_trajectory_csv(r.trajectory, out / f"trajectory_{name}.csv")
    return {name: r.summary() for name, r in results.items()}


HANDLERS = {
    "simulate": cmd_simulate,
    "viability": cmd_viability,
    "optimize": cmd_optimize,
    "verify": cmd_verify,
    "sweep-lambda": cmd_sweep_lambda,
    "sweep-horizon": cmd_sweep_horizon,
    "scenario": cmd_scenario,
}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        params, x0, cfg, spec = _load(args)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](args, params, x0, cfg, spec, out)
        write_json(summary, out / f"{args.command.replace('-', '_')}.json")
    except ValidationError as exc:
        return _fail("validation", exc, 1)
    except NumericalError as exc:
        return _fail("numerical", exc, 2)
    except OSError as exc:
        return _fail("io", exc, 1)
    print(json.dumps(_jsonable(summary), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
