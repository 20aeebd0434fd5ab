#!/usr/bin/env python3
"""End-to-end demo on a synthetic corpus with offline backends.

Synthesizes a corpus, scores every pair with the lexical scorer, runs all
four matching strategies, serializes reader inputs, mines silver labels
against the simulator's reader, and prints the conflict report. Artifacts
land in the output directory, one file per stage.

Usage:
    python scripts/demo_pipeline.py --out runs/demo --questions 50 --seed 7
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pairqa.cli import main as pairqa


def run(args: list) -> None:
    argv = [str(a) for a in args]
    print(f"\n$ pairqa {' '.join(argv)}")
    code = pairqa(argv)
    if code != 0:
        raise SystemExit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/demo")
    parser.add_argument("--questions", type=int, default=50)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    run(
        [
            "simulate",
            "--out", out,
            "--seed", args.seed,
            "--simulate.num_questions", args.questions,
            "--simulate.single_pivot", "true",
        ]
    )
    dataset = out / "sim_corpus.jsonl"
    truth = out / "sim_truth.jsonl"

    run(["score", "--dataset", dataset, "--out", out, "--scoring-mode", "cutoff"])
    for strategy in ("optimal", "greedy", "random", "same-answer"):
        strategy_out = out / strategy
        run(["match", "--dataset", dataset, "--out", out, "--strategy", strategy])
        (strategy_out).mkdir(parents=True, exist_ok=True)
        (out / "matchings.jsonl").rename(strategy_out / "matchings.jsonl")
    # keep the optimal matching as the pipeline handoff
    (out / "optimal" / "matchings.jsonl").replace(out / "matchings.jsonl")

    run(["serialize", "--dataset", dataset, "--out", out, "--variant", "pairwise"])
    run(["mine", "--dataset", dataset, "--out", out, "--predictor.truth", truth])
    run(["analyze", "--dataset", dataset, "--out", out])
    print(f"\nartifacts in {out}/")


if __name__ == "__main__":
    main()
