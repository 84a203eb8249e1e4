"""Generate a synthetic dataset and write every plot-ready CSV.

    python scripts/figure_data.py --out runs/seed0 [--seed 0] [--reinforcement 0.3]

Produces ``data/`` (interactions, pages, planted quality) and ``work/`` with
scatter.csv (rank vs future activity), mse_curve.csv (MSE against alpha)
and polarization.csv (fit quality per polarization threshold).
"""

import argparse
import sys
from pathlib import Path

from poprank.cli import main as poprank


def build(out: Path, seed: int, reinforcement: float, alphas: str) -> int:
    data, work = out / "data", out / "work"
    steps = [
        ["synth", "--out", str(data), "--seed", str(seed),
         "--reinforcement", str(reinforcement)],
        ["ingest", "--interactions", str(data / "interactions.csv"),
         "--pages", str(data / "pages.csv"), "--train", "40:55", "--test", "56:61",
         "--out", str(work)],
        ["pipeline", "--workdir", str(work), "--alphas", alphas],
    ]
    for argv in steps:
        print("$ poprank " + " ".join(argv), flush=True)
        code = poprank(argv)
        if code:
            return code
    print(f"\nplot-ready files in {work}:")
    for name in ("scatter.csv", "mse_curve.csv", "polarization.csv"):
        print(f"  {work / name}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reinforcement", type=float, default=0.3)
    parser.add_argument("--alphas", default="-2:1:0.25")
    args = parser.parse_args()
    sys.exit(build(args.out, args.seed, args.reinforcement, args.alphas))
