"""Optimise and verify the four reference weightings; write trajectories, curves and a summary."""
import argparse
import json
from pathlib import Path

from sir_icu import SolverConfig
from sir_icu.experiments import run_reference_scenarios
from sir_icu.output import _jsonable, emit_curves_csv, emit_trajectory_csv, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/scenarios"))
    ap.add_argument("--dt", type=float, default=None, help="primal step (default T/12000)")
    ap.add_argument("--verify-dt", type=float, default=400.0 / 48000, help="step for the costate check")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    results = run_reference_scenarios(SolverConfig(dt=args.dt), SolverConfig(dt=args.verify_dt))
    for name, r in results.items():
        emit_trajectory_csv(r.trajectory, args.out / f"trajectory_{name}.csv")
    emit_curves_csv(results["a"].params, args.out / "curves.csv")
    summary = {name: r.summary() for name, r in results.items()}
    write_json(summary, args.out / "scenarios.json")

    print(f"{'name':8} {'lambda_i':>8} {'t_star':>12} {'herd':>10} {'region':>10} {'H dev':>9}  checks")
    for name, r in results.items():
        herd = r.result.herd_time
        print(
            f"{name:8} {r.params.lambda_i:8g} {r.result.t_star:12.6f} "
            f"{herd if herd is not None else float('nan'):10.4f} {r.result.region_at_switch.value:>10} "
            f"{r.report.hamiltonian_dev:9.1e}  {'ok' if all(r.checks.values()) else json.dumps(_jsonable(r.checks))}"
        )


if __name__ == "__main__":
    main()
