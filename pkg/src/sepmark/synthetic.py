"""A small generated corpus with nested same-type mentions.

Every name word is a PROT mention.  A name followed by a protein head
("kinase", "receptor", ...) also forms a longer PROT mention, giving a
same-type nesting; a name followed by a DNA head ("gene", "promoter")
forms a DNA mention around the inner PROT.  Labels are a deterministic
function of the words, so a model that can represent nesting can reach
perfect training F1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Mention, Sentence, Token, has_overlap

NAMES = ("tcf", "lef", "stat", "jak", "raf", "ras", "myc", "fos", "jun", "src", "abl", "p53")
PROT_HEADS = ("kinase", "receptor", "factor", "subunit")
DNA_HEADS = ("gene", "promoter", "enhancer")
FILLERS = (
    ("the", "DT"), ("a", "DT"), ("of", "IN"), ("in", "IN"), ("with", "IN"), ("and", "CC"),
    ("cells", "NNS"), ("expression", "NN"), ("activity", "NN"), ("levels", "NNS"), ("binding", "NN"),
    ("we", "PRP"), ("observed", "VBD"), ("binds", "VBZ"), ("activates", "VBZ"), ("regulates", "VBZ"),
    ("was", "VBD"), ("increased", "VBN"), ("human", "JJ"), ("mouse", "JJ"), ("strong", "JJ"),
    ("that", "IN"), ("to", "TO"), ("by", "IN"),
)
LABELS = ("DNA", "PROT")


@dataclass(frozen=True)
class SyntheticConfig:
    num_train: int = 500
    num_test: int = 100
    seed: int = 13
    # probability that a sentence contains a protein compound (same-type nesting)
    nested_fraction: float = 0.4
    min_fillers: int = 2
    max_fillers: int = 6


def _phrase(rng, kind):
    """Tokens and mentions (relative offsets) of one entity phrase."""
    name = NAMES[rng.integers(len(NAMES))]
    if kind == "name":
        return [(name, "NN")], [Mention(0, 0, "PROT")]
    if kind == "prot":
        head = PROT_HEADS[rng.integers(len(PROT_HEADS))]
        return [(name, "NN"), (head, "NN")], [Mention(0, 0, "PROT"), Mention(0, 1, "PROT")]
    head = DNA_HEADS[rng.integers(len(DNA_HEADS))]
    return [(name, "NN"), (head, "NN")], [Mention(0, 0, "PROT"), Mention(0, 1, "DNA")]


def _fillers(rng, count):
    idx = rng.integers(len(FILLERS), size=count)
    return [FILLERS[i] for i in idx]


def generate_sentence(rng, cfg: SyntheticConfig, ident: str) -> Sentence:
    kinds = ["prot"] if rng.random() < cfg.nested_fraction else []
    kinds += [("name", "dna")[rng.integers(2)] for _ in range(rng.integers(0, 3))]
    if not kinds and rng.random() < 0.7:
        kinds.append("name")
    rng.shuffle(kinds)
    tokens: list[tuple[str, str]] = []
    mentions = []
    tokens += _fillers(rng, int(rng.integers(1, 3)))
    for kind in kinds:
        words, ms = _phrase(rng, kind)
        base = len(tokens)
        tokens += words
        mentions += [Mention(m.start + base, m.end + base, m.label) for m in ms]
        tokens += _fillers(rng, int(rng.integers(1, cfg.max_fillers - cfg.min_fillers + 2)))
    return Sentence(tuple(Token(w, p) for w, p in tokens), tuple(mentions), ident)


def generate(cfg: SyntheticConfig = SyntheticConfig()) -> tuple[Corpus, Corpus]:
    """(train, test) corpora drawn from one seeded stream."""
    rng = np.random.default_rng(cfg.seed)
    train = [generate_sentence(rng, cfg, f"train-{i}") for i in range(cfg.num_train)]
    test = [generate_sentence(rng, cfg, f"test-{i}") for i in range(cfg.num_test)]
    return Corpus(train, LABELS), Corpus(test, LABELS)


def vocabulary(corpus: Corpus) -> set[str]:
    return {t.surface for s in corpus for t in s.tokens}


def same_type_nested_fraction(corpus: Corpus) -> float:
    def nested(s):
        ms = sorted(s.mentions)
        return any(a.label == b.label and a.overlaps(b) for i, a in enumerate(ms) for b in ms[i + 1:])

    return sum(nested(s) for s in corpus) / max(len(corpus), 1)


def overlap_fraction(corpus: Corpus) -> float:
    return sum(has_overlap(s) for s in corpus) / max(len(corpus), 1)


def long_sentence(n: int, seed: int = 0) -> Sentence:
    """An ``n``-token sentence from the same generator (for timing runs)."""
    rng = np.random.default_rng(seed)
    cfg = SyntheticConfig()
    tokens: list[Token] = []
    mentions: list[Mention] = []
    while len(tokens) < n:
        s = generate_sentence(rng, cfg, "")
        base = len(tokens)
        tokens += s.tokens
        mentions += [Mention(m.start + base, m.end + base, m.label) for m in s.mentions]
    tokens = tokens[:n]
    mentions = [m for m in mentions if m.end < n]
    return Sentence(tuple(tokens), tuple(mentions), f"long-{n}")
