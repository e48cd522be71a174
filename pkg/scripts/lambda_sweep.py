"""Sweep the L2 strength through the CLI, tuning the penalty on a dev split.

    python3 scripts/lambda_sweep.py --scheme edge --train train.olner --dev dev.olner --test test.olner
"""

import argparse
import re
from pathlib import Path

from sepmark.cli import run
from sepmark.learning import LAMBDA_SWEEP


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scheme", default="edge")
    ap.add_argument("--train", required=True)
    ap.add_argument("--dev", required=True)
    ap.add_argument("--test", required=True)
    ap.add_argument("--out", default="runs/lambda")
    ap.add_argument("--max-iters", default="200")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for lam in LAMBDA_SWEEP:
        model = out / f"{args.scheme}-l2-{lam:g}.model"
        code = run(["train", "--scheme", args.scheme, "--train", args.train, "--dev", args.dev,
                    "--out", str(model), "--l2", str(lam), "--max-iters", args.max_iters, "--reduce-overlaps"])
        if code:
            raise SystemExit(code)
        report = Path(str(model) + ".eval.txt")
        run(["evaluate", "--test", args.test, "--model", str(model), "--output", str(report)])
        f1 = re.search(r"^F1=(\S+)$", report.read_text(), re.M).group(1)
        results.append((lam, float(f1)))
    for lam, f1 in results:
        print(f"l2={lam:g}\ttest F1={f1:.4f}")


if __name__ == "__main__":
    main()
