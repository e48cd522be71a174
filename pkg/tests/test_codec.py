from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sepmark import codec
from sepmark.codec import Separator as S
from sepmark.errors import EnumerationLimitError, InvalidSequenceError


def seq(text):
    return codec.parse_sequence(text)


def flags_oracle(n, spans):
    """Gap labels straight from the flag definitions, one gap at a time."""
    out = []
    for g in range(n + 1):
        e = any(end == g - 1 for _, end in spans)
        c = any(start <= g - 1 and end >= g for start, end in spans)
        s = any(start == g for start, _ in spans)
        out.append(S.from_flags(e, c, s))
    return out


def crossing(spans):
    return any(a < c <= b < d for a, b in spans for c, d in spans)


def test_separator_flags():
    assert [s.name for s in codec.SEPARATORS] == ["X", "S", "E", "ES", "C", "CS", "EC", "ECS"]
    for s in codec.SEPARATORS:
        assert S.from_flags(s.has_e, s.has_c, s.has_s) is s
        assert s.next_in == (s.has_s or s.has_c)
        assert s.prev_in == (s.has_e or s.has_c)
    assert len({s.value for s in S}) == 8


@pytest.mark.parametrize(
    "n, spans, expected",
    [
        (4, {(1, 3), (2, 2)}, "X S CS EC E"),
        (3, set(), "X X X X"),
        (4, {(1, 1), (1, 3)}, "X S EC C E"),
    ],
)
def test_encode_examples(n, spans, expected):
    assert codec.format_sequence(codec.encode(n, spans)) == expected
    assert codec.encode(n, spans) == flags_oracle(n, spans)


def test_is_valid_examples():
    assert codec.is_valid(seq("X S EC C E"))
    assert not codec.is_valid(seq("E X"))
    assert not codec.is_valid(seq("S X"))


def test_check_names_gap():
    with pytest.raises(InvalidSequenceError) as info:
        codec.check(seq("X S X E"))
    assert info.value.gap == 2
    with pytest.raises(InvalidSequenceError) as info:
        codec.check(seq("X S C"))
    assert info.value.gap == 2


@pytest.mark.parametrize(
    "text, expected",
    [("X S CS EC E", {(1, 3), (2, 2)}), ("X X X X", set()), ("S CS E", {(0, 1), (1, 1)})],
)
def test_interpret_examples(text, expected):
    assert codec.interpret(seq(text)) == expected


def test_interpret_rejects_invalid():
    with pytest.raises(InvalidSequenceError):
        codec.interpret(seq("S X"))


def test_interpret_examples_by_preimage():
    # [S, CS, E] has exactly one span set mapping onto it
    pre = [m for m in codec.all_span_sets(2) if codec.encode(2, m) == seq("S CS E")]
    assert pre == [{(0, 1), (1, 1)}]
    # the nested reading is the unique smallest non-crossing preimage of X S CS EC E
    pre = [m for m in codec.all_span_sets(4) if codec.encode(4, m) == seq("X S CS EC E") and not crossing(m)]
    smallest = min(len(m) for m in pre)
    assert [m for m in pre if len(m) == smallest] == [{(1, 3), (2, 2)}]


def test_canonicalize_examples():
    assert codec.canonicalize_nested(4, {(1, 3), (2, 2)}) == {(1, 3), (2, 2)}
    assert codec.encode(3, {(0, 1), (1, 2)}) == seq("S CS EC E")
    assert codec.canonicalize_nested(3, {(0, 1), (1, 2)}) == {(0, 2), (1, 1)}
    assert codec.canonicalize_nested(3, set()) == set()


def test_small_enumerations():
    assert [codec.format_sequence(s) for s in codec.enumerate_valid_sequences(1)] == ["X X", "S E"]
    assert len(codec.enumerate_valid_sequences(2)) == 8
    assert len(codec.enumerate_valid_sequences(3)) == 40


@pytest.mark.parametrize("n", range(1, 6))
def test_enumeration_matches_brute_force(n):
    fast = codec.enumerate_valid_sequences(n)
    brute = codec.brute_force_valid_sequences(n)
    assert fast == sorted(brute, key=codec.sort_key)


def _matrix_power_count(n):
    # independent: float matrix power with numpy
    m = np.array([[1.0, 1.0], [1.0, 5.0]])
    return int(round(np.ones(2) @ np.linalg.matrix_power(m, n - 1) @ np.ones(2)))


@pytest.mark.parametrize("n", range(1, 9))
def test_count_law(n):
    assert len(codec.enumerate_valid_sequences(n)) == codec.transfer_matrix_count(n) == _matrix_power_count(n)


def test_enumeration_bound():
    with pytest.raises(EnumerationLimitError):
        codec.enumerate_valid_sequences(9)
    with pytest.raises(EnumerationLimitError):
        codec.brute_force_valid_sequences(6)


@pytest.mark.parametrize("n", range(1, 6))
def test_exhaustive_span_sets(n):
    images = {}
    for spans in codec.all_span_sets(n):
        s = codec.encode(n, spans)
        assert s == flags_oracle(n, spans)
        assert codec.is_valid(s)
        images.setdefault(tuple(s), []).append(spans)
    valid = codec.enumerate_valid_sequences(n)
    # encode is onto the valid sequences
    assert set(images) == {tuple(v) for v in valid}
    for s in valid:
        out = codec.interpret(s)
        assert codec.encode(n, out) == s
        assert not crossing(out)
        assert out in images[tuple(s)]
        assert codec.canonicalize_nested(n, out) == out
        assert [a.next_in for a in s[:-1]] == [b.prev_in for b in s[1:]]


def test_boundary_sets():
    for n in range(1, 5):
        for s in codec.enumerate_valid_sequences(n):
            assert s[0] in codec.FIRST_GAP and s[-1] in codec.LAST_GAP


def test_sequence_text_roundtrip():
    for s in codec.enumerate_valid_sequences(3):
        assert codec.parse_sequence(codec.format_sequence(s)) == s
    with pytest.raises(ValueError):
        codec.parse_sequence("X Q")


@st.composite
def span_sets(draw):
    n = draw(st.integers(1, 12))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=8))
    return n, {(min(a, b), max(a, b)) for a, b in pairs}


@given(span_sets())
def test_encode_properties_longer(case):
    n, spans = case
    s = codec.encode(n, spans)
    assert s == flags_oracle(n, spans)
    assert codec.is_valid(s)
    canon = codec.canonicalize_nested(n, spans)
    assert codec.encode(n, canon) == s
    assert codec.canonicalize_nested(n, canon) == canon
    assert not crossing(canon)
    starts = [a for a, _ in spans]
    ends = [b for _, b in spans]
    if not crossing(spans) and len(set(starts)) == len(starts) and len(set(ends)) == len(ends):
        # non-crossing sets without shared boundaries are fixed points
        assert canon == spans


@given(st.lists(st.sampled_from(codec.SEPARATORS), min_size=2, max_size=8))
def test_random_sequences(xs):
    if codec.is_valid(xs):
        assert codec.encode(len(xs) - 1, codec.interpret(xs)) == xs
    else:
        with pytest.raises(InvalidSequenceError):
            codec.interpret(xs)
