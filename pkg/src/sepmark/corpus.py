"""Sentences with possibly overlapping typed mentions, and their file formats.

Two formats are supported:

OLNER
    Three lines per sentence followed by a blank line: tab-joined tokens,
    tab-joined POS tags, and ``start,end,LABEL`` mentions joined by ``;``
    (0-based inclusive token indices; empty line for no mentions).

CoNLL
    One token per line (``surface pos chunk netag``), blank line between
    sentences, BIO or BILOU entity tags.  Cannot hold overlapping mentions.
"""

from __future__ import annotations

import gzip
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import FormatError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = "-"
    # CoNLL chunk column, kept only so CoNLL files roundtrip.
    chunk: str = "-"

    def __post_init__(self):
        for name in ("surface", "pos"):
            value = getattr(self, name)
            if not value:
                raise FormatError(f"empty token {name}")
            if "\t" in value or "\n" in value or "\r" in value:
                raise FormatError(f"token {name} {value!r} contains tab or newline")


@dataclass(frozen=True, order=True)
class Mention:
    start: int
    end: int
    label: str

    @property
    def span(self):
        return (self.start, self.end)

    def overlaps(self, other: "Mention") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    mentions: tuple[Mention, ...] = ()
    id: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        # duplicates collapse; canonical order is (start, end, label)
        mentions = tuple(sorted(set(self.mentions)))
        n = len(self.tokens)
        for m in mentions:
            if m.end < m.start:
                raise FormatError(f"end < start in mention {m}")
            if m.start < 0 or m.end >= n:
                raise FormatError(f"mention {m} out of range for {n} tokens")
        object.__setattr__(self, "mentions", mentions)

    def __len__(self):
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def spans(self, label: str) -> set[tuple[int, int]]:
        """Spans of the mentions carrying ``label``."""
        return {m.span for m in self.mentions if m.label == label}

    def with_mentions(self, mentions: Iterable[Mention]) -> "Sentence":
        return Sentence(self.tokens, tuple(mentions), self.id)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        used = {m.label for s in self.sentences for m in s.mentions}
        declared = list(dict.fromkeys(self.labels))
        extra = sorted(used - set(declared))
        object.__setattr__(self, "labels", tuple(declared + extra))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    @property
    def num_words(self) -> int:
        return sum(len(s) for s in self.sentences)

    def subset(self, sentences: Iterable[Sentence]) -> "Corpus":
        return Corpus(tuple(sentences), self.labels)


@dataclass(frozen=True)
class CorpusStats:
    num_sentences: int
    num_sentences_with_overlap: int
    num_mentions: int
    num_overlapping_mentions: int
    num_same_type_overlapping_mentions: int

    def as_dict(self):
        return {
            "sentences": self.num_sentences,
            "sentences_with_overlap": self.num_sentences_with_overlap,
            "mentions": self.num_mentions,
            "overlapping_mentions": self.num_overlapping_mentions,
            "same_type_overlapping_mentions": self.num_same_type_overlapping_mentions,
        }


# ---------------------------------------------------------------------------
# OLNER


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        return bytes(text).decode("utf-8")
    return text


def parse_olner(text) -> Corpus:
    """Parse an OLNER byte (or str) stream into a :class:`Corpus`."""
    lines = _decode(text).split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    sentences = []
    block: list[tuple[int, str]] = []

    def flush():
        if not block:
            return
        first = block[0][0]
        if len(block) != 3:
            raise FormatError(f"sentence block has {len(block)} lines, expected 3", first)
        (_, tok_line), (pos_line_no, pos_line), (men_line_no, men_line) = block
        words = tok_line.split("\t")
        tags = pos_line.split("\t")
        if len(words) != len(tags):
            raise FormatError(
                f"{len(words)} tokens but {len(tags)} POS tags", pos_line_no
            )
        try:
            tokens = tuple(Token(w, p) for w, p in zip(words, tags))
        except FormatError as exc:
            raise FormatError(str(exc), first) from None
        mentions = []
        if men_line:
            for item in men_line.split(";"):
                parts = item.split(",", 2)
                if len(parts) != 3:
                    raise FormatError(f"bad mention field {item!r}", men_line_no)
                try:
                    start, end = int(parts[0]), int(parts[1])
                except ValueError:
                    raise FormatError(f"bad mention field {item!r}", men_line_no) from None
                if end < start:
                    raise FormatError("end < start", men_line_no)
                if start < 0 or end >= len(tokens):
                    raise FormatError(
                        f"span {start},{end} out of range for {len(tokens)} tokens",
                        men_line_no,
                    )
                if not parts[2]:
                    raise FormatError(f"empty label in {item!r}", men_line_no)
                mentions.append(Mention(start, end, parts[2]))
        sentences.append(Sentence(tokens, tuple(mentions), str(len(sentences))))
        block.clear()

    for i, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if line == "" and len(block) == 3:
            flush()
        else:
            if len(block) == 3:
                raise FormatError("sentence block has more than 3 lines", block[0][0])
            block.append((i, line))
    if block:
        flush()
    return Corpus(tuple(sentences))


def format_mentions(mentions: Iterable[Mention]) -> str:
    return ";".join(f"{m.start},{m.end},{m.label}" for m in sorted(mentions))


def write_olner(corpus: Corpus | Iterable[Sentence]) -> bytes:
    out = []
    for s in corpus:
        out.append("\t".join(t.surface for t in s.tokens))
        out.append("\t".join(t.pos for t in s.tokens))
        out.append(format_mentions(s.mentions))
        out.append("")
    return ("\n".join(out) + "\n").encode("utf-8") if out else b""


# ---------------------------------------------------------------------------
# CoNLL


def _split_tag(tag: str):
    if tag == "O":
        return "O", None
    prefix, sep, label = tag.partition("-")
    if not sep or prefix not in ("B", "I", "L", "E", "U", "S") or not label:
        return None, None
    # BIOES spellings are read as BILOU
    prefix = {"E": "L", "S": "U"}.get(prefix, prefix)
    return prefix, label


def _tags_to_mentions(tags: Sequence[str], first_line: int) -> list[Mention]:
    mentions = []
    open_start, open_label = None, None

    def close(end):
        nonlocal open_start, open_label
        if open_start is not None:
            mentions.append(Mention(open_start, end, open_label))
        open_start, open_label = None, None

    for k, tag in enumerate(tags):
        prefix, label = _split_tag(tag)
        if prefix is None:
            raise FormatError(f"bad entity tag {tag!r}", first_line + k)
        if prefix in ("I", "L") and open_label != label:
            log.warning(
                "dangling %s tag at line %d treated as %s",
                tag, first_line + k, "B" if prefix == "I" else "U",
            )
            prefix = "B" if prefix == "I" else "U"
        if prefix == "O":
            close(k - 1)
        elif prefix == "B":
            close(k - 1)
            open_start, open_label = k, label
        elif prefix == "U":
            close(k - 1)
            mentions.append(Mention(k, k, label))
        elif prefix == "L":
            close(k)
    close(len(tags) - 1)
    return mentions


def parse_conll_bio(text) -> Corpus:
    """Parse CoNLL-style column data with BIO (IOB2) or BILOU entity tags.

    Columns are ``surface pos chunk netag``; three-column (``surface pos
    netag``) and two-column (``surface netag``) variants are also read.
    ``-DOCSTART-`` lines are skipped.  An ``I-``/``L-`` tag that does not
    continue an open mention of the same type starts a new one and is
    logged as a warning.
    """
    lines = _decode(text).split("\n")
    sentences = []
    rows: list[tuple[int, list[str]]] = []

    def flush():
        if not rows:
            return
        tokens = []
        for line_no, cols in rows:
            if len(cols) == 4:
                tokens.append(Token(cols[0], cols[1], cols[2]))
            elif len(cols) == 3:
                tokens.append(Token(cols[0], cols[1]))
            elif len(cols) == 2:
                tokens.append(Token(cols[0]))
            else:
                raise FormatError(f"expected 2-4 columns, got {len(cols)}", line_no)
        mentions = _tags_to_mentions([cols[-1] for _, cols in rows], rows[0][0])
        sentences.append(Sentence(tuple(tokens), tuple(mentions), str(len(sentences))))
        rows.clear()

    for i, line in enumerate(lines, start=1):
        cols = line.split()
        if not cols:
            flush()
        elif cols[0] == "-DOCSTART-":
            flush()
        else:
            rows.append((i, cols))
    flush()
    return Corpus(tuple(sentences))


def mentions_to_tags(n: int, mentions: Iterable[Mention], tagging: str = "bio") -> list[str]:
    """BIO/BILOU tags for a non-overlapping mention set."""
    tags = ["O"] * n
    for m in sorted(mentions):
        if any(t != "O" for t in tags[m.start : m.end + 1]):
            raise FormatError(f"overlapping mention {m} cannot be written as {tagging}")
        if tagging == "bilou":
            if m.start == m.end:
                tags[m.start] = f"U-{m.label}"
                continue
            tags[m.end] = f"L-{m.label}"
        else:
            tags[m.end] = f"I-{m.label}"
        tags[m.start] = f"B-{m.label}"
        for k in range(m.start + 1, m.end):
            tags[k] = f"I-{m.label}"
    return tags


def write_conll_bio(corpus: Corpus | Iterable[Sentence], tagging: str = "bio") -> bytes:
    blocks = []
    for s in corpus:
        tags = mentions_to_tags(len(s), s.mentions, tagging)
        blocks.append(
            "".join(f"{t.surface} {t.pos} {t.chunk} {tag}\n" for t, tag in zip(s.tokens, tags))
        )
    return "\n".join(blocks).encode("utf-8")


def read_corpus(path, fmt: str = "olner") -> Corpus:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        data = fh.read()
    if fmt == "olner":
        return parse_olner(data)
    if fmt == "conll":
        return parse_conll_bio(data)
    raise ValueError(f"unknown corpus format {fmt!r}")


def write_corpus(corpus: Corpus, path, fmt: str = "olner") -> None:
    data = write_olner(corpus) if fmt == "olner" else write_conll_bio(corpus)
    path = Path(path)
    if path.suffix == ".gz":
        # mtime pinned so output bytes are reproducible
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(data)
    else:
        path.write_bytes(data)


# ---------------------------------------------------------------------------
# statistics


def overlapping_flags(mentions: Sequence[Mention]) -> list[tuple[bool, bool]]:
    """Per mention: (overlaps any other mention, overlaps one of the same type)."""
    flags = []
    for i, m in enumerate(mentions):
        any_ol = same_ol = False
        for j, other in enumerate(mentions):
            if i != j and m.overlaps(other):
                any_ol = True
                if other.label == m.label:
                    same_ol = True
        flags.append((any_ol, same_ol))
    return flags


def has_overlap(sentence: Sentence) -> bool:
    ms = sorted(sentence.mentions)
    # sorted by start: any overlap shows up against the running max end
    reach = -1
    for m in ms:
        if m.start <= reach:
            return True
        reach = max(reach, m.end)
    return False


def compute_stats(corpus: Corpus) -> CorpusStats:
    n_with = n_ment = n_ol = n_same = 0
    for s in corpus:
        flags = overlapping_flags(s.mentions)
        n_ment += len(flags)
        ol = sum(a for a, _ in flags)
        n_ol += ol
        n_same += sum(b for _, b in flags)
        n_with += ol > 0
    return CorpusStats(len(corpus), n_with, n_ment, n_ol, n_same)


def format_stats(stats: CorpusStats) -> str:
    n_s, n_m = stats.num_sentences, stats.num_mentions

    def pct(a, b):
        return f"{100.0 * a / b:.0f}" if b else "0"

    return (
        f"# sentence\t{n_s}\n"
        f"  w/ o.l.\t{stats.num_sentences_with_overlap}\t({pct(stats.num_sentences_with_overlap, n_s)})\n"
        f"# mentions\t{n_m}\n"
        f"  o.l.\t{stats.num_overlapping_mentions}\t({pct(stats.num_overlapping_mentions, n_m)})\n"
        f"  o.l. (s)\t{stats.num_same_type_overlapping_mentions}"
        f"\t({pct(stats.num_same_type_overlapping_mentions, n_m)})\n"
    )


def split_by_overlap(corpus: Corpus) -> tuple[Corpus, Corpus]:
    """Split into (sentences with an overlapping mention, the rest)."""
    ol, plain = [], []
    for s in corpus:
        (ol if has_overlap(s) else plain).append(s)
    return corpus.subset(ol), corpus.subset(plain)
