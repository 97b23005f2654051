"""Switching time against the weight ratio lambda_i / lambda_v."""
import argparse
from pathlib import Path

from sir_icu import SolverConfig
from sir_icu.experiments import DEFAULT_RATIOS, coincidence_threshold, reference_spec, sweep_lambda
from sir_icu.output import emit_rows_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--ratios", type=lambda s: [float(x) for x in s.split(",")], default=list(DEFAULT_RATIOS))
    ap.add_argument("--dt", type=float, default=None)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    spec = reference_spec()
    rows = sweep_lambda(args.ratios, spec, SolverConfig(dt=args.dt))
    emit_rows_csv(rows, args.out / "sweep_lambda.csv")
    for r in rows:
        print(f"ratio {r.key:6g}  t* {r.t_star:12.6f}  shift {r.delta_t_star:+.3e}  s(t*) {r.s_at_switch:.6f}  {r.region_at_switch}")
    threshold = coincidence_threshold(rows, spec.params.horizon_T)
    print(f"largest ratio matching ratio 0: {threshold:g}")


if __name__ == "__main__":
    main()
