#!/usr/bin/env python3
"""Headline density experiments: a passing random set, a failing periodic
set, and the congruence rescaling identity, written as report files.

Everything is seeded; rerunning reproduces the same reports except the
created/runtime metadata fields.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from simplexlab.lab import (
    ExperimentConfig,
    corollary_q_check,
    emit_report,
    pinned_experiment,
)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Run the bundled density experiments")
    parser.add_argument("--output-dir", default="experiments", help="Report directory")
    parser.add_argument("--seed", type=int, default=20260214)
    parser.add_argument("--box", type=int, default=24, help="Cube side for both sets")
    parser.add_argument("--max-pins", type=int, default=24)
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    dense = ExperimentConfig(
        dim=5,
        simplex="e-orthonormal:1",
        set_kind="bernoulli",
        set_params={"delta": 0.5},
        lambda_sq_min=16,
        lambda_sq_max=25,
        box_side=args.box,
        eps=0.1,
        seed=args.seed,
        max_pins=args.max_pins,
    )
    rep = pinned_experiment(dense)
    emit_report(rep, out / "bernoulli.json", "json")
    emit_report(rep, out / "bernoulli.csv", "csv")
    print(
        f"bernoulli half-density: passes={rep.passes} "
        f"lambda0={rep.lambda0_found} best={rep.best_value}"
    )

    sparse = ExperimentConfig(
        dim=5,
        simplex="e-orthonormal:1",
        set_kind="periodic-counterexample",
        set_params={"q": 1, "M": 2},
        lambda_sq_min=100,
        lambda_sq_max=100,
        box_side=args.box,
        eps=1e-5,
        seed=args.seed,
    )
    rep = pinned_experiment(sparse)
    emit_report(rep, out / "periodic.json", "json")
    print(
        f"periodic pattern at its forbidden radius: passes={rep.passes} "
        f"best={rep.best_value} (threshold {float(rep.threshold):.2e})"
    )

    rows = []
    for r in (1, 2, 3):
        check = corollary_q_check(r, dim=5, lambda_sq_max=9, box_side=11)
        rows.append({"r": r, "passes": check.passes})
        print(f"rescaling identity r={r}: passes={check.passes}")
    (out / "rescaling.json").write_text(json.dumps(rows, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
