import gzip
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sepmark.corpus import (
    Corpus,
    Mention,
    Sentence,
    Token,
    compute_stats,
    format_stats,
    has_overlap,
    mentions_to_tags,
    parse_conll_bio,
    parse_olner,
    read_corpus,
    split_by_overlap,
    write_conll_bio,
    write_corpus,
    write_olner,
)
from sepmark.errors import FormatError

from conftest import DATA, make_sentence

TCF_BLOCK = b"the\thuman\tTCF-1\tprotein\nDT\tNN\tNN\tNN\n1,3,PROT;2,2,PROT\n\n"


def test_parse_tcf_block():
    c = parse_olner(TCF_BLOCK)
    assert len(c) == 1
    s = c[0]
    assert s.words == ["the", "human", "TCF-1", "protein"]
    assert [t.pos for t in s.tokens] == ["DT", "NN", "NN", "NN"]
    assert set(s.mentions) == {Mention(1, 3, "PROT"), Mention(2, 2, "PROT")}
    assert c.labels == ("PROT",)


def test_empty_mention_line():
    c = parse_olner(b"a\tb\n-\t-\n\n\n")
    assert len(c) == 1 and c[0].mentions == ()


def test_end_before_start_reports_line():
    text = b"x\n-\n\n\na\tb\tc\tz\n-\t-\t-\t-\n3,1,PROT\n\n"
    with pytest.raises(FormatError, match="end < start at line 7"):
        parse_olner(text)


@pytest.mark.parametrize(
    "text, line",
    [
        (b"a\tb\n-\t-\n0,5,X\n\n", 3),
        (b"a\tb\n-\n\n\n", 2),
        (b"a\n-\n0,0,X\nextra\n\n", 1),
        (b"a\n-\n0,x,X\n\n", 3),
        (b"a\n-\n", 1),
    ],
)
def test_malformed_blocks(text, line):
    with pytest.raises(FormatError) as info:
        parse_olner(text)
    assert info.value.line == line


def test_write_sorts_mentions():
    s = make_sentence(["a", "b", "c", "d"], [(2, 2, "A"), (1, 3, "A")])
    out = write_olner(Corpus([s]))
    assert out.split(b"\n")[2] == b"1,3,A;2,2,A"


def test_empty_corpus_writes_nothing():
    assert write_olner(Corpus()) == b""
    assert len(parse_olner(b"")) == 0


def test_duplicates_collapse():
    s = make_sentence(["a"], [(0, 0, "A"), (0, 0, "A")])
    assert len(s.mentions) == 1


def test_token_rejects_tabs():
    with pytest.raises(FormatError):
        Token("a\tb")
    with pytest.raises(FormatError):
        Token("")


def test_fixture_roundtrip_bytes():
    raw = (DATA / "fixture.olner").read_bytes()
    assert write_olner(parse_olner(raw)) == raw


def test_conll_fixture_roundtrip_bytes():
    raw = (DATA / "fixture.conll").read_bytes()
    c = parse_conll_bio(raw)
    assert write_conll_bio(c) == raw
    assert [len(s) for s in c] == [9, 2, 2]
    assert c[1].mentions == (Mention(0, 1, "PER"),)


def test_conll_examples(caplog):
    c = parse_conll_bio(b"EU NNP I-NP B-ORG\nrejects VBZ I-VP O\n")
    assert c[0].mentions == (Mention(0, 0, "ORG"),)
    assert parse_conll_bio(b"a DT O\nb NN O\n")[0].mentions == ()
    assert parse_conll_bio(b"John U-PER\n")[0].mentions == (Mention(0, 0, "PER"),)
    with caplog.at_level(logging.WARNING):
        c = parse_conll_bio(b"a X I-PER\nb X I-PER\nc X I-LOC\n")
    assert set(c[0].mentions) == {Mention(0, 1, "PER"), Mention(2, 2, "LOC")}
    assert "dangling" in caplog.text


def test_conll_bilou_runs():
    c = parse_conll_bio(b"a B-X\nb I-X\nc L-X\nd O\ne S-Y\n")
    assert set(c[0].mentions) == {Mention(0, 2, "X"), Mention(4, 4, "Y")}


def test_bilou_tags_roundtrip():
    ms = [Mention(0, 0, "A"), Mention(2, 4, "B")]
    tags = mentions_to_tags(5, ms, "bilou")
    assert tags == ["U-A", "O", "B-B", "I-B", "L-B"]
    s = make_sentence(list("abcde"), [(0, 0, "A"), (2, 4, "B")])
    assert parse_conll_bio(write_conll_bio([s], "bilou"))[0].mentions == s.mentions


def test_gzip_and_conll_files(tmp_path):
    c = read_corpus(DATA / "fixture.olner")
    path = tmp_path / "c.olner.gz"
    write_corpus(c, path)
    assert gzip.decompress(path.read_bytes()) == (DATA / "fixture.olner").read_bytes()
    assert read_corpus(path) == c
    first = path.read_bytes()
    write_corpus(c, path)
    assert path.read_bytes() == first


STATS_CASES = [
    ([(1, 3, "P"), (2, 2, "P")], (1, 1, 2, 2, 2)),
    ([(0, 0, "A"), (2, 2, "B")], (1, 0, 2, 0, 0)),
    ([(0, 2, "A"), (1, 1, "B")], (1, 1, 2, 2, 0)),
]


@pytest.mark.parametrize("mentions, expected", STATS_CASES)
def test_stats_examples(mentions, expected):
    c = Corpus([make_sentence(["w"] * 4, mentions)])
    st_ = compute_stats(c)
    assert (
        st_.num_sentences,
        st_.num_sentences_with_overlap,
        st_.num_mentions,
        st_.num_overlapping_mentions,
        st_.num_same_type_overlapping_mentions,
    ) == expected


def test_stats_golden():
    c = read_corpus(DATA / "fixture.olner")
    assert format_stats(compute_stats(c)) == (DATA / "fixture.stats.txt").read_text()


def test_split_by_overlap_examples():
    sents = [make_sentence(["w"] * 4, m) for m, _ in STATS_CASES]
    ol, plain = split_by_overlap(Corpus(sents))
    assert list(ol) == [sents[0], sents[2]]
    assert list(plain) == [sents[1]]
    none = Corpus([make_sentence(["a", "b"])] * 2)
    ol, plain = split_by_overlap(none)
    assert len(ol) == 0 and len(plain) == 2
    nested = Corpus([sents[0], sents[0]])
    assert len(split_by_overlap(nested)[1]) == 0


# -- property tests ---------------------------------------------------------

words = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zs", "Zl", "Zp")), min_size=1, max_size=5)


@st.composite
def sentences(draw):
    n = draw(st.integers(1, 6))
    toks = tuple(Token(draw(words), draw(st.sampled_from(["-", "NN", "DT"]))) for _ in range(n))
    spans = draw(
        st.lists(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.sampled_from(["A", "B", "C"])),
            max_size=6,
        )
    )
    ms = tuple(Mention(min(a, b), max(a, b), lab) for a, b, lab in spans)
    return Sentence(toks, ms)


@given(st.lists(sentences(), max_size=5))
def test_olner_roundtrip_property(sents):
    c = Corpus(sents)
    back = parse_olner(write_olner(c))
    assert back == c
    assert write_olner(back) == write_olner(c)


def _brute_overlapping(s):
    ms = s.mentions
    return sum(
        any(i != j and max(a.start, b.start) <= min(a.end, b.end) for j, b in enumerate(ms)) for i, a in enumerate(ms)
    )


@given(st.lists(sentences(), max_size=5))
def test_stats_match_pairwise_count(sents):
    c = Corpus(sents)
    stats = compute_stats(c)
    assert stats.num_overlapping_mentions == sum(_brute_overlapping(s) for s in sents)
    assert stats.num_same_type_overlapping_mentions <= stats.num_overlapping_mentions <= stats.num_mentions
    assert stats.num_sentences_with_overlap == sum(_brute_overlapping(s) > 0 for s in sents)


@given(st.lists(sentences(), max_size=6))
def test_split_is_partition(sents):
    c = Corpus(sents)
    ol, plain = split_by_overlap(c)
    assert len(ol) + len(plain) == len(c)
    assert all(has_overlap(s) for s in ol) and not any(has_overlap(s) for s in plain)
    assert sorted(map(write_olner, [[s] for s in ol] + [[s] for s in plain])) == sorted(
        write_olner([s]) for s in c
    )
