"""Exact-match mention scoring, paired bootstrap, penalty tuning and throughput."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, Mention, has_overlap

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(-2.0 + 0.1 * i, 10) for i in range(41))


@dataclass(frozen=True)
class PRF:
    true_positives: int
    num_predicted: int
    num_gold: int

    @property
    def precision(self) -> float:
        if self.num_predicted == 0:
            return 1.0 if self.num_gold == 0 else 0.0
        return self.true_positives / self.num_predicted

    @property
    def recall(self) -> float:
        if self.num_gold == 0:
            return 1.0 if self.num_predicted == 0 else 0.0
        return self.true_positives / self.num_gold

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(
            self.true_positives + other.true_positives,
            self.num_predicted + other.num_predicted,
            self.num_gold + other.num_gold,
        )

    def as_dict(self) -> dict:
        return {
            "P": self.precision,
            "R": self.recall,
            "F1": self.f1,
            "TP": self.true_positives,
            "pred": self.num_predicted,
            "gold": self.num_gold,
        }


def _gold_sets(gold) -> list[set[Mention]]:
    return [set(s.mentions) for s in gold]


def _counts(gold_sets, predicted) -> np.ndarray:
    """Per-sentence (tp, pred, gold) rows."""
    if len(gold_sets) != len(predicted):
        raise ValueError(f"misaligned outputs: {len(gold_sets)} gold sentences, {len(predicted)} predicted")
    rows = np.zeros((len(gold_sets), 3), dtype=np.int64)
    for i, (g, p) in enumerate(zip(gold_sets, predicted)):
        p = set(p)
        rows[i] = (len(g & p), len(p), len(g))
    return rows


def score(gold, predicted: Sequence[set[Mention]]) -> PRF:
    """Micro-averaged exact-match PRF over (start, end, label) triples."""
    tp, pred, gd = _counts(_gold_sets(gold), predicted).sum(axis=0)
    return PRF(int(tp), int(pred), int(gd))


def _f1(tp, pred, gold):
    return PRF(int(tp), int(pred), int(gold)).f1


@dataclass(frozen=True)
class SignificanceResult:
    f1_a: float
    f1_b: float
    p_value: float
    replicates: int


def bootstrap_significance(gold, pred_a, pred_b, replicates: int = 1000, seed: int = 0) -> SignificanceResult:
    """Paired bootstrap over sentences.

    The p-value is the fraction of resamples where the F1 difference does
    not keep the sign of the full-data difference.  Identical outputs give 1.
    """
    if replicates < 1000:
        raise ValueError("at least 1000 bootstrap replicates are required")
    gs = _gold_sets(gold)
    a, b = _counts(gs, pred_a), _counts(gs, pred_b)
    fa, fb = _f1(*a.sum(axis=0)), _f1(*b.sum(axis=0))
    diff = fa - fb
    if diff == 0 or len(gs) == 0:
        return SignificanceResult(fa, fb, 1.0, replicates)
    rng = np.random.default_rng(seed)
    flips = 0
    n = len(gs)
    for _ in range(replicates):
        idx = rng.integers(0, n, size=n)
        d = _f1(*a[idx].sum(axis=0)) - _f1(*b[idx].sum(axis=0))
        if d * diff <= 0:
            flips += 1
    return SignificanceResult(fa, fb, flips / replicates, replicates)


@dataclass
class PenaltySweep:
    points: list[tuple[float, PRF]]
    chosen: float
    monotone: bool = field(default=True)

    @property
    def best(self) -> PRF:
        return dict(self.points)[self.chosen]


def parse_grid(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` -> inclusive grid, e.g. ``-2:2:0.1``."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"penalty grid must look like lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise ValueError("penalty grid needs step > 0 and hi >= lo")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 10) for i in range(count))


def tune_penalty(model, dev: Corpus, grid: Sequence[float] = DEFAULT_GRID) -> PenaltySweep:
    """Decode ``dev`` once per offset, keep the best F1 (ties: smallest |c|).

    Sets ``model.penalty_offset`` to the chosen value.  Offsets are relative
    to the trained weight, not to any previous offset.
    """
    grid = sorted(set(float(c) for c in grid))
    if not grid:
        raise ValueError("empty penalty grid")
    chunks = model.prepare(list(dev))
    points = []
    for c in grid:
        pred = model.predict(dev, offset=c, chunks=chunks)
        points.append((c, score(dev, pred)))
    counts = [prf.num_predicted for _, prf in points]
    monotone = all(x <= y for x, y in zip(counts, counts[1:]))
    if not monotone:
        log.warning("predicted mention count is not monotone in the penalty offset: %s", counts)
    chosen, _ = max(points, key=lambda p: (p[1].f1, -abs(p[0]), -p[0]))
    model.penalty_offset = chosen
    return PenaltySweep(points, chosen, monotone)


@dataclass(frozen=True)
class ThroughputReport:
    words_per_second: float
    total_words: int
    wall_seconds: float


def throughput(model, corpus) -> ThroughputReport:
    """Words per second of feature extraction plus decoding."""
    sentences = list(corpus)
    words = sum(len(s) for s in sentences)
    if words == 0:
        raise ValueError("no words to decode")
    t0 = time.perf_counter()
    model.predict(sentences)
    wall = time.perf_counter() - t0
    return ThroughputReport(words / wall if wall > 0 else float("inf"), words, wall)


# ---------------------------------------------------------------------------
# reports


def format_prf_table(rows: Sequence[tuple[str, PRF]]) -> str:
    lines = [f"{'':<12}{'P':>8}{'R':>8}{'F1':>8}{'TP':>8}{'pred':>8}{'gold':>8}"]
    for name, prf in rows:
        lines.append(
            f"{name:<12}{100 * prf.precision:>8.2f}{100 * prf.recall:>8.2f}{100 * prf.f1:>8.2f}"
            f"{prf.true_positives:>8d}{prf.num_predicted:>8d}{prf.num_gold:>8d}"
        )
    return "\n".join(lines)


def format_key_values(values: dict, prefix: str = "") -> str:
    out = []
    for key, val in values.items():
        if isinstance(val, float):
            val = repr(round(val, 6))
        out.append(f"{prefix}{key}={val}")
    return "\n".join(out)


def evaluation_report(gold, predicted, split_overlap: bool = False, throughput_report=None) -> str:
    """Overall PRF, optionally split into sentences with (O) and without (Ø) overlap."""
    rows = [("overall", score(gold, predicted))]
    if split_overlap:
        flags = [has_overlap(s) for s in gold]
        for name, want in (("O", True), ("Ø", False)):
            idx = [i for i, f in enumerate(flags) if f == want]
            rows.append((name, score([gold[i] for i in idx], [predicted[i] for i in idx])))
    text = [format_prf_table(rows), ""]
    kv = {}
    for name, prf in rows:
        pre = "" if name == "overall" else ("O." if name == "O" else "noO.")
        kv.update({pre + k: v for k, v in prf.as_dict().items()})
    if throughput_report is not None:
        kv["w/s"] = throughput_report.words_per_second
    text.append(format_key_values(kv))
    return "\n".join(text) + "\n"


def format_sweep(sweep: PenaltySweep) -> str:
    lines = [f"{'offset':>8}{'P':>8}{'R':>8}{'F1':>8}{'pred':>8}"]
    for c, prf in sweep.points:
        mark = "  *" if c == sweep.chosen else ""
        lines.append(
            f"{c:>8.2f}{100 * prf.precision:>8.2f}{100 * prf.recall:>8.2f}{100 * prf.f1:>8.2f}"
            f"{prf.num_predicted:>8d}{mark}"
        )
    lines.append("")
    lines.append(f"chosen={sweep.chosen!r}")
    lines.append(f"monotone={str(sweep.monotone).lower()}")
    return "\n".join(lines) + "\n"
