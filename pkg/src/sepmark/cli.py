"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 scheme-capacity error.
Set ``SEPMARK_LOG`` (DEBUG, INFO, WARNING, ...) to change log verbosity.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .corpus import compute_stats, format_stats, read_corpus, write_corpus
from .demos import demo_spurious, demo_uniqueness
from .errors import CapacityError, EnumerationLimitError, SepmarkError
from .evaluation import (
    DEFAULT_GRID,
    bootstrap_significance,
    evaluation_report,
    format_key_values,
    format_sweep,
    parse_grid,
    score,
    throughput,
    tune_penalty,
)
from .features import FeatureConfig, load_brown_clusters, load_config
from .learning import Model, TrainConfig, check_trainable, train
from .networks import SCHEMES

log = logging.getLogger("sepmark")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, command: str, config: dict, inputs: dict, outputs: dict, started: str, seed=None) -> Path:
    manifest = {
        "command": command,
        "library_version": __version__,
        "config": config,
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "started": started,
        "finished": _now(),
    }
    target = Path(str(path) + ".manifest.json")
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def _threads(value):
    return value if value else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands

TRAIN_KEYS = (
    "scheme", "train", "dev", "format", "features", "feature_config", "brown", "l2", "max_iters",
    "grad_tol", "history", "seed", "penalty_grid", "reduce_overlaps",
)


def _feature_config(args) -> FeatureConfig:
    cfg = load_config(args.feature_config) if args.feature_config else FeatureConfig.preset(args.features)
    if args.brown:
        cfg = replace(cfg, brown_file=str(args.brown), brown_window=max(cfg.brown_window, 1))
    return cfg


def cmd_train(args) -> int:
    started = _now()
    if args.from_manifest:
        saved = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        if saved.get("command") != "train":
            raise UsageError("manifest was not written by the train command")
        for key in TRAIN_KEYS:
            if key in saved["config"]:
                setattr(args, key, saved["config"][key])
    if not args.scheme or not args.train or not args.out:
        raise UsageError("train needs --scheme, --train and --out (or --from-manifest with --out)")
    for key in ("train", "dev", "brown", "feature_config"):
        if getattr(args, key):
            setattr(args, key, str(Path(getattr(args, key)).resolve()))
    fcfg = _feature_config(args)
    clusters = load_brown_clusters(fcfg.brown_file) if fcfg.brown_file and fcfg.brown_window >= 0 else None
    corpus = read_corpus(args.train, args.format)
    if not args.reduce_overlaps:
        check_trainable(corpus, args.scheme)
    tcfg = TrainConfig(
        l2=args.l2, max_iterations=args.max_iters, grad_tolerance=args.grad_tol, history=args.history,
        seed=args.seed, threads=_threads(args.threads), reduce_overlaps=args.reduce_overlaps,
    )
    model, reports = train(corpus, args.scheme, fcfg, tcfg, clusters)
    out = Path(args.out)
    outputs = {"model": str(out)}
    if args.dev:
        dev = read_corpus(args.dev, args.format)
        grid = parse_grid(args.penalty_grid) if args.penalty_grid else DEFAULT_GRID
        sweep = tune_penalty(model, dev, grid)
        sweep_path = Path(str(out) + ".penalty.txt")
        sweep_path.write_text(format_sweep(sweep), encoding="utf-8")
        outputs["penalty_sweep"] = str(sweep_path)
    model.save(out)
    log_path = Path(str(out) + ".objective.tsv")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("iteration\tobjective\tgrad_norm\twall_seconds\n")
        for r in reports:
            fh.write(f"{r.iteration}\t{r.objective!r}\t{r.grad_norm!r}\t{r.wall_time:.4f}\n")
    outputs["objective_log"] = str(log_path)
    config = {key: getattr(args, key) for key in TRAIN_KEYS}
    config["feature_config_resolved"] = fcfg.as_dict()
    inputs = {"train": args.train, "dev": args.dev, "brown": fcfg.brown_file or None}
    write_manifest(out, "train", config, inputs, outputs, started, args.seed)
    print(f"trained {args.scheme} model: {len(model.weights)} weights, {len(reports) - 1} iterations, "
          f"objective {reports[-1].objective:.6f}")
    print(f"penalty offset {model.penalty_offset!r}")
    return EXIT_OK


def cmd_predict(args) -> int:
    started = _now()
    model = Model.load(args.model)
    corpus = read_corpus(args.input, args.format)
    found = model.predict(corpus)
    predicted = corpus.subset(s.with_mentions(m) for s, m in zip(corpus, found))
    write_corpus(predicted, args.output, args.format)
    write_manifest(args.output, "predict", {"format": args.format}, {"model": args.model, "input": args.input},
                   {"predictions": args.output}, started)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = _now()
    gold = read_corpus(args.test, args.format)
    if (args.model is None) == (args.predictions is None):
        raise UsageError("evaluate needs exactly one of --model or --predictions")
    tp = None
    if args.model:
        model = Model.load(args.model)
        predicted = model.predict(gold)
        tp = throughput(model, gold) if gold.num_words else None
    else:
        predicted = _aligned_predictions(args.predictions, args.format, gold)
    text = evaluation_report(gold, predicted, args.split_overlap, tp)
    if args.baseline:
        base = _aligned_predictions(args.baseline, args.format, gold)
        sig = bootstrap_significance(gold, predicted, base, args.replicates, args.seed)
        text += format_key_values(
            {"baseline.F1": sig.f1_b, "p_value": sig.p_value, "replicates": sig.replicates}
        ) + "\n"
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        write_manifest(args.output, "evaluate", {"split_overlap": args.split_overlap, "seed": args.seed},
                       {"test": args.test, "model": args.model, "predictions": args.predictions,
                        "baseline": args.baseline}, {"report": args.output}, started, args.seed)
    return EXIT_OK


def _aligned_predictions(path, fmt, gold):
    pred = read_corpus(path, fmt)
    if len(pred) != len(gold) or any(p.words != g.words for p, g in zip(pred, gold)):
        raise SepmarkError(f"{path}: predictions are not aligned with the gold corpus")
    return [set(s.mentions) for s in pred]


def cmd_tune_penalty(args) -> int:
    started = _now()
    model = Model.load(args.model)
    dev = read_corpus(args.dev, args.format)
    grid = parse_grid(args.penalty_grid) if args.penalty_grid else DEFAULT_GRID
    untuned = score(dev, model.predict(dev, offset=0.0)).f1
    sweep = tune_penalty(model, dev, grid)
    text = format_sweep(sweep) + format_key_values({"untuned.F1": untuned, "tuned.F1": sweep.best.f1}) + "\n"
    sys.stdout.write(text)
    out = args.out or args.model
    model.save(out)
    write_manifest(out, "tune-penalty", {"penalty_grid": args.penalty_grid or "-2:2:0.1"},
                   {"model": args.model, "dev": args.dev}, {"model": str(out)}, started)
    return EXIT_OK


def cmd_stats(args) -> int:
    corpus = read_corpus(args.input, args.format)
    sys.stdout.write(format_stats(compute_stats(corpus)))
    return EXIT_OK


def cmd_demo_spurious(args) -> int:
    weights = None
    if args.weights:
        try:
            weights = [float(x) for x in args.weights.split(",")]
        except ValueError:
            raise UsageError("--weights takes six comma-separated numbers") from None
        if len(weights) != 6:
            raise UsageError("--weights takes six comma-separated numbers")
    sys.stdout.write(demo_spurious(weights).format())
    return EXIT_OK


def cmd_demo_uniqueness(args) -> int:
    for n in range(1, args.n + 1) if args.all else [args.n]:
        sys.stdout.write(demo_uniqueness(n).format())
    return EXIT_OK


def cmd_bench(args) -> int:
    model = Model.load(args.model)
    corpus = read_corpus(args.input, args.format)
    reports = [throughput(model, corpus) for _ in range(args.repeat)]
    best = max(reports, key=lambda r: r.words_per_second)
    sys.stdout.write(format_key_values(
        {"scheme": model.scheme, "words": best.total_words, "seconds": best.wall_seconds,
         "w/s": best.words_per_second, "repeats": args.repeat}
    ) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sepmark", description="Overlapping mention recognition with mention separators")
    p.add_argument("--version", action="version", version=f"sepmark {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fmt(sp):
        sp.add_argument("--format", choices=("olner", "conll"), default="olner")

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--scheme", choices=SCHEMES)
    t.add_argument("--train")
    t.add_argument("--dev", help="tune the mention penalty on this corpus after training")
    t.add_argument("--out")
    t.add_argument("--features", choices=("ace", "genia", "conll"), default="ace")
    t.add_argument("--feature-config", help="key = value feature config file")
    t.add_argument("--brown", help="Brown cluster file (bits<TAB>word<TAB>count)")
    t.add_argument("--l2", type=float, default=0.01)
    t.add_argument("--max-iters", type=int, default=200)
    t.add_argument("--grad-tol", type=float, default=1e-4)
    t.add_argument("--history", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--threads", type=int, default=0, help="worker cap (default: all cores)")
    t.add_argument("--penalty-grid", help="lo:hi:step (default -2:2:0.1)")
    t.add_argument("--reduce-overlaps", action="store_true",
                   help="drop gold mentions an lcrf scheme cannot hold instead of failing")
    t.add_argument("--from-manifest", help="re-run with the configuration stored in a train manifest")
    fmt(t)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="decode a corpus and write predictions")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--output", required=True)
    pr.add_argument("--threads", type=int, default=0)
    fmt(pr)
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="score a model or a prediction file against gold")
    ev.add_argument("--test", required=True)
    ev.add_argument("--model")
    ev.add_argument("--predictions")
    ev.add_argument("--baseline", help="prediction file of a second system for the paired bootstrap")
    ev.add_argument("--replicates", type=int, default=1000)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--split-overlap", action="store_true")
    ev.add_argument("--output")
    ev.add_argument("--threads", type=int, default=0)
    fmt(ev)
    ev.set_defaults(func=cmd_evaluate)

    tp = sub.add_parser("tune-penalty", help="pick the mention-penalty offset on a dev corpus")
    tp.add_argument("--model", required=True)
    tp.add_argument("--dev", required=True)
    tp.add_argument("--penalty-grid")
    tp.add_argument("--out", help="where to write the tuned model (default: overwrite --model)")
    tp.add_argument("--threads", type=int, default=0)
    fmt(tp)
    tp.set_defaults(func=cmd_tune_penalty)

    st = sub.add_parser("stats", help="corpus overlap statistics")
    st.add_argument("--input", required=True)
    fmt(st)
    st.set_defaults(func=cmd_stats)

    ds = sub.add_parser("demo-spurious", help="spurious structures of the mention hypergraph")
    ds.add_argument("--weights", help="six comma-separated scores for edges A..F")
    ds.set_defaults(func=cmd_demo_spurious)

    du = sub.add_parser("demo-uniqueness", help="encode every span set of an n-token sentence")
    du.add_argument("--n", type=int, default=3)
    du.add_argument("--all", action="store_true", help="report every length from 1 to n")
    du.set_defaults(func=cmd_demo_uniqueness)

    b = sub.add_parser("bench", help="decoding throughput in words per second")
    b.add_argument("--model", required=True)
    b.add_argument("--input", required=True)
    b.add_argument("--repeat", type=int, default=3)
    b.add_argument("--threads", type=int, default=0)
    fmt(b)
    b.set_defaults(func=cmd_bench)
    return p


def _setup_logging():
    level = os.environ.get("SEPMARK_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"sepmark: CapacityError: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (SepmarkError, ValueError, OSError, EnumerationLimitError) as exc:
        print(f"sepmark: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
