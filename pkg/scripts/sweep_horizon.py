"""Switching time against the horizon for three weightings."""
import argparse
import math
from pathlib import Path

from sir_icu import REFERENCE_X0, SolverConfig, reference_params
from sir_icu.experiments import DEFAULT_HORIZONS, ScenarioSpec, successive_differences, sweep_horizon
from sir_icu.output import emit_rows_csv

CASES = {
    "equal_weights": dict(lambda_v=1.0, lambda_i=1.0),
    "vaccination_only": dict(lambda_v=1.0, lambda_i=0.0),
    "infections_only": dict(lambda_v=0.0, lambda_i=1.0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--horizons", type=lambda s: [float(x) for x in s.split(",")], default=list(DEFAULT_HORIZONS))
    ap.add_argument("--dt", type=float, default=None, help="shared step (default: grid of the shortest horizon)")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for name, weights in CASES.items():
        p = reference_params(**weights)
        ratio = p.lambda_i / p.lambda_v if p.lambda_v else math.inf
        spec = ScenarioSpec(name, p, REFERENCE_X0, ratio, tuple(sorted(args.horizons)))
        rows = sweep_horizon(spec, SolverConfig(dt=args.dt))
        emit_rows_csv(rows, args.out / f"sweep_horizon_{name}.csv")
        print(name)
        for r in rows:
            print(f"  T {r.key:7g}  t* {r.t_star:14.6f}")
        print("  successive differences:", ", ".join(f"{d:.3e}" for d in successive_differences(rows)))


if __name__ == "__main__":
    main()
