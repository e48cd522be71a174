"""Mention separators: gap labels that encode overlapping same-type mentions.

A sentence of ``n`` tokens has ``n + 1`` gaps; gap ``g`` sits before token
``g``.  Each gap carries one of eight separators, the combination of three
flags:

* ``S`` -- a mention starts at token ``g``
* ``E`` -- a mention ends at token ``g - 1``
* ``C`` -- a mention covers both ``g - 1`` and ``g``
"""

from __future__ import annotations

import enum
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .errors import EnumerationLimitError, InvalidSequenceError

MAX_ENUMERATION_LENGTH = 8


class Separator(enum.Enum):
    # value = (hasE, hasC, hasS); declaration order is the canonical order
    X = (False, False, False)
    S = (False, False, True)
    E = (True, False, False)
    ES = (True, False, True)
    C = (False, True, False)
    CS = (False, True, True)
    EC = (True, True, False)
    ECS = (True, True, True)

    @property
    def has_e(self) -> bool:
        return self.value[0]

    @property
    def has_c(self) -> bool:
        return self.value[1]

    @property
    def has_s(self) -> bool:
        return self.value[2]

    @property
    def next_in(self) -> bool:
        """Token after the gap is inside some mention."""
        return self.has_s or self.has_c

    @property
    def prev_in(self) -> bool:
        """Token before the gap is inside some mention."""
        return self.has_e or self.has_c

    @classmethod
    def from_flags(cls, e: bool, c: bool, s: bool) -> "Separator":
        return _BY_FLAGS[(bool(e), bool(c), bool(s))]

    @classmethod
    def parse(cls, symbol: str) -> "Separator":
        try:
            return cls[symbol]
        except KeyError:
            raise ValueError(f"unknown separator {symbol!r}") from None

    def __repr__(self):
        return self.name


SEPARATORS = tuple(Separator)
_BY_FLAGS = {s.value: s for s in Separator}
_ORDER = {s: i for i, s in enumerate(SEPARATORS)}

FIRST_GAP = (Separator.X, Separator.S)
LAST_GAP = (Separator.X, Separator.E)


def sort_key(seq: Sequence[Separator]) -> tuple[int, ...]:
    return tuple(_ORDER[s] for s in seq)


def format_sequence(seq: Sequence[Separator]) -> str:
    return " ".join(s.name for s in seq)


def parse_sequence(text: str) -> list[Separator]:
    return [Separator.parse(tok) for tok in text.split()]


def encode(n: int, spans: Iterable[tuple[int, int]]) -> list[Separator]:
    """The unique separator sequence of a same-type span set."""
    starts = [False] * (n + 1)
    ends = [False] * (n + 1)
    # cont[g]: some span covers tokens g-1 and g; filled by a difference array
    cover = [0] * (n + 2)
    for start, end in spans:
        if not 0 <= start <= end < n:
            raise ValueError(f"span ({start}, {end}) out of range for n={n}")
        starts[start] = True
        ends[end + 1] = True
        if end > start:
            cover[start + 1] += 1
            cover[end + 1] -= 1
    seq = []
    running = 0
    for g in range(n + 1):
        running += cover[g]
        seq.append(Separator.from_flags(ends[g], running > 0, starts[g]))
    return seq


def check(seq: Sequence[Separator]) -> None:
    """Raise :class:`InvalidSequenceError` naming the first offending gap."""
    if len(seq) < 2:
        raise InvalidSequenceError(f"sequence of length {len(seq)} is too short", 0)
    if seq[0].has_e or seq[0].has_c:
        raise InvalidSequenceError(f"gap 0 cannot carry {seq[0].name}", 0)
    last = len(seq) - 1
    if seq[last].has_s or seq[last].has_c:
        raise InvalidSequenceError(f"gap {last} cannot carry {seq[last].name}", last)
    for g in range(last):
        if seq[g].next_in != seq[g + 1].prev_in:
            raise InvalidSequenceError(
                f"gap {g + 1}: {seq[g + 1].name} cannot follow {seq[g].name}", g + 1
            )


def is_valid(seq: Sequence[Separator]) -> bool:
    try:
        check(seq)
    except InvalidSequenceError:
        return False
    return True


def in_mention_profile(seq: Sequence[Separator]) -> list[bool]:
    """Per token, whether it is covered by a mention (read from the left gap)."""
    return [s.next_in for s in seq[:-1]]


def interpret(seq: Sequence[Separator]) -> set[tuple[int, int]]:
    """Read a valid sequence back into a nested span set.

    Open starts are kept on a stack.  An ``E`` without ``C`` closes every
    open mention.  An ``E`` with ``C`` closes only the innermost one, unless
    it is the last open start, which then stays open (a shared start).
    """
    check(seq)
    spans = set()
    stack: list[int] = []
    for g, sep in enumerate(seq):
        if sep.has_e:
            if sep.has_c:
                spans.add((stack[-1], g - 1))
                if len(stack) > 1:
                    stack.pop()
            else:
                spans.update((s, g - 1) for s in stack)
                stack.clear()
        if sep.has_s:
            stack.append(g)
    return spans


def canonicalize_nested(n: int, spans: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    return interpret(encode(n, spans))


def _check_bound(n: int):
    if n < 1:
        raise ValueError("need at least one token")
    if n > MAX_ENUMERATION_LENGTH:
        raise EnumerationLimitError(
            f"n={n} exceeds the enumeration bound {MAX_ENUMERATION_LENGTH}"
        )


def enumerate_valid_sequences(n: int) -> list[list[Separator]]:
    """All valid sequences for ``n`` tokens in canonical lexicographic order."""
    _check_bound(n)
    out = []
    seq: list[Separator] = []

    def extend(g):
        if g == n:
            for sep in LAST_GAP:
                if sep.prev_in == seq[-1].next_in:
                    out.append(seq + [sep])
            return
        for sep in SEPARATORS:
            if g == 0:
                if sep not in FIRST_GAP:
                    continue
            elif sep.prev_in != seq[-1].next_in:
                continue
            seq.append(sep)
            extend(g + 1)
            seq.pop()

    extend(0)
    return out


def brute_force_valid_sequences(n: int) -> list[list[Separator]]:
    """Filter all 8^(n+1) sequences through :func:`is_valid` (small n only)."""
    if n > 5:
        raise EnumerationLimitError("brute force over 8^(n+1) sequences limited to n <= 5")
    return [list(seq) for seq in product(SEPARATORS, repeat=n + 1) if is_valid(seq)]


# two word states, O (outside) and I (inside); entries count separators
TRANSFER_MATRIX = np.array([[1, 1], [1, 5]], dtype=object)


def transfer_matrix_count(n: int) -> int:
    """Number of valid sequences, ``[1, 1] M^(n-1) [1, 1]^T``."""
    if n < 1:
        raise ValueError("need at least one token")
    v = np.array([1, 1], dtype=object)
    for _ in range(n - 1):
        v = v @ TRANSFER_MATRIX
    return int(v.sum())


def all_span_sets(n: int):
    """Every subset of the n(n+1)/2 spans of an n-token sentence."""
    spans = [(i, j) for i in range(n) for j in range(i, n)]
    for mask in range(1 << len(spans)):
        yield {spans[b] for b in range(len(spans)) if mask >> b & 1}
