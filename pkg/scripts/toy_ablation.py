#!/usr/bin/env python3
"""Temperature ablation on the toy landscape, with a per-round breakdown.

Usage: python scripts/toy_ablation.py [--trials N] [--rounds-cap N] [--out FILE]

Runs the scripted greedy policy at tau = 0 (deterministic top-k) and
tau = 5 (stochastic) over seeded trials, writes the raw trial table to
CSV, and prints the summary plus an ASCII histogram of discovery rounds.
"""

import argparse
import sys
from collections import Counter
from pathlib import Path

from evosearch import toybench


def histogram(results, rounds_cap: int) -> str:
    lines = []
    for tau in sorted({r.tau for r in results}, reverse=True):
        subset = [r for r in results if r.tau == tau]
        counts = Counter(toybench.effective_rounds(r, rounds_cap) for r in subset)
        lines.append(f"tau={tau:g}")
        for rounds in sorted(counts):
            label = "censored" if rounds > rounds_cap else f"round {rounds:2d}"
            lines.append(f"  {label}  {'#' * counts[rounds]}")
    return "\n".join(lines)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--rounds-cap", type=int, default=toybench.DEFAULT_ROUNDS_CAP)
    parser.add_argument("--out", type=Path, default=Path("toy_ablation.csv"))
    args = parser.parse_args()

    landscape, inits = toybench.reference_scenario()
    results = toybench.run_trials(
        landscape, inits, taus=(5.0, 0.0), trials=args.trials, rounds_cap=args.rounds_cap
    )
    args.out.write_text(toybench.trials_to_csv(results))
    print(toybench.summarize(results, rounds_cap=args.rounds_cap))
    print()
    print(histogram(results, args.rounds_cap))
    print(f"\ntrial table: {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
