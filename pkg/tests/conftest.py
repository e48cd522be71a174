from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from sepmark.corpus import Corpus, Mention, Sentence, Token

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


def make_sentence(words, mentions=(), pos=None):
    pos = pos or ["-"] * len(words)
    return Sentence(tuple(Token(w, p) for w, p in zip(words, pos)), tuple(Mention(*m) for m in mentions))


@pytest.fixture
def tcf():
    return make_sentence(
        ["the", "human", "TCF-1", "protein"], [(1, 3, "PROT"), (2, 2, "PROT")], ["DT", "NN", "NN", "NN"]
    )


@pytest.fixture
def il2():
    return make_sentence(["the", "IL2", "regulatory", "region"], [(1, 1, "PROT"), (1, 3, "PROT")])


def random_corpus(rng, num=3, max_len=4, labels=("P", "Q"), vocab="a b c d e f".split(), p_mention=0.5):
    """Small random corpus with arbitrary (possibly crossing) mentions."""
    sents = []
    for _ in range(num):
        n = int(rng.integers(1, max_len + 1))
        words = [str(rng.choice(vocab)) for _ in range(n)]
        ms = set()
        for i in range(n):
            for j in range(i, n):
                for lab in labels:
                    if rng.random() < p_mention / n:
                        ms.add((i, j, lab))
        sents.append(make_sentence(words, sorted(ms)))
    return Corpus(sents, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
