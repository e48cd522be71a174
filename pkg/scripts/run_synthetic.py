"""Train every scheme on the synthetic nested corpus and compare test F1.

Writes the corpus as OLNER plus one objective curve per scheme (TSV) into
the output directory.

    python3 scripts/run_synthetic.py --out runs/synthetic --schemes edge lcrf-single
"""

import argparse
import time
from pathlib import Path

from sepmark.corpus import write_corpus
from sepmark.evaluation import evaluation_report, score
from sepmark.features import FeatureConfig
from sepmark.learning import TrainConfig, train
from sepmark.networks import SCHEMES
from sepmark.synthetic import SyntheticConfig, generate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/synthetic")
    ap.add_argument("--schemes", nargs="+", default=list(SCHEMES), choices=SCHEMES)
    ap.add_argument("--num-train", type=int, default=500)
    ap.add_argument("--num-test", type=int, default=100)
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--l2", type=float, default=0.01)
    ap.add_argument("--max-iters", type=int, default=200)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tr, te = generate(SyntheticConfig(num_train=args.num_train, num_test=args.num_test, seed=args.seed))
    write_corpus(tr, out / "train.olner")
    write_corpus(te, out / "test.olner")

    cfg = TrainConfig(l2=args.l2, max_iterations=args.max_iters, reduce_overlaps=True)
    rows = []
    for scheme in args.schemes:
        t0 = time.perf_counter()
        model, reports = train(tr, scheme, FeatureConfig.preset("genia"), cfg)
        wall = time.perf_counter() - t0
        model.save(out / f"{scheme}.model")
        with open(out / f"{scheme}.objective.tsv", "w") as fh:
            fh.write("iteration\tobjective\n")
            for r in reports:
                fh.write(f"{r.iteration}\t{r.objective!r}\n")
        pred = model.predict(te)
        (out / f"{scheme}.report.txt").write_text(evaluation_report(te, pred, split_overlap=True))
        rows.append((scheme, score(tr, model.predict(tr)).f1, score(te, pred).f1, len(reports) - 1, wall))

    print(f"{'scheme':<12}{'train F1':>10}{'test F1':>10}{'iters':>8}{'seconds':>10}")
    for scheme, ftr, fte, iters, wall in rows:
        print(f"{scheme:<12}{ftr:>10.3f}{fte:>10.3f}{iters:>8d}{wall:>10.1f}")


if __name__ == "__main__":
    main()
