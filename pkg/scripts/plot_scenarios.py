"""Phase portrait of the reference optima over the safe and viable boundaries.

Reads the CSVs written by ``run_scenarios.py``. Needs matplotlib
(``pip install .[plots]``).
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _load(path):
    return np.genfromtxt(path, delimiter=",", names=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--results", type=Path, default=Path("results/scenarios"))
    args = ap.parse_args()

    curves = _load(args.results / "curves.csv")
    fig, (ax, bx) = plt.subplots(1, 2, figsize=(11, 4.2))
    ax.plot(curves["s"], curves["gamma"], "k-", lw=1, label="safe boundary")
    ax.plot(curves["s"], curves["gamma_star"], "k--", lw=1, label="viable boundary")
    for name in ("a", "b", "c"):
        tr = _load(args.results / f"trajectory_{name}.csv")
        ax.plot(tr["s"], tr["i"], lw=1.2, label=name)
        bx.plot(tr["t"], tr["i"], lw=1.2, label=name)
    ax.set(xlabel="s", ylabel="i", xlim=(0.2, 0.75), ylim=(0, 0.0055))
    bx.set(xlabel="t", ylabel="i")
    ax.legend(fontsize=8)
    bx.legend(fontsize=8)
    fig.tight_layout()
    out = args.results / "phase.png"
    fig.savefig(out, dpi=130)
    print(out)


if __name__ == "__main__":
    main()
