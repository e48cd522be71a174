"""Decoding time of a trained model as the sentence length grows.

    python3 scripts/decode_scaling.py --model runs/synthetic/edge.model
"""

import argparse
import time

from sepmark.learning import Model
from sepmark.synthetic import long_sentence


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True)
    ap.add_argument("--lengths", type=int, nargs="+", default=[50, 100, 200, 400, 800])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    model = Model.load(args.model)
    base = None
    print("n\tseconds\tratio")
    for n in args.lengths:
        s = long_sentence(n, seed=5)
        chunks = model.prepare([s])
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            model.predict([s], chunks=chunks)
            times.append(time.perf_counter() - t0)
        best = min(times)
        base = base or best / n
        print(f"{n}\t{best:.5f}\t{best / (base * n):.2f}")


if __name__ == "__main__":
    main()
