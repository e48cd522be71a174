import numpy as np
import pytest

from sepmark.corpus import Corpus
from sepmark.errors import FormatError
from sepmark.features import (
    PRESETS,
    FeatureConfig,
    FeatureDictionary,
    build_dictionary,
    edge_features,
    feature_matrix,
    input_features,
    load_brown_clusters,
    load_config,
    word_shape,
)
from sepmark.networks import build, gold_structure

from conftest import make_sentence, random_corpus

WORD_ONLY = FeatureConfig("ace", word_window=0, pos_window=-1, ngram_max=1, bow_window=0, orthographic=False,
                          shape_window=-1, affix_max=0, brown_window=-1)


def only(prefix, feats):
    return [f for f in feats if f.startswith(prefix)]


def test_word_window(tcf):
    cfg = FeatureConfig.preset("ace", word_window=1)
    assert only("W[", input_features(tcf, 2, cfg)) == ["W[-1]=human", "W[0]=TCF-1", "W[+1]=protein"]
    assert "W[-1]=<BEGIN>" in input_features(tcf, 0, cfg)
    assert "W[+3]=<END>" in input_features(tcf, 3, FeatureConfig.preset("ace"))


def test_shape_by_hand(tcf):
    assert word_shape("TCF-1") == "AAA-0"
    cfg = FeatureConfig.preset("conll")
    feats = input_features(tcf, 2, cfg)
    assert "SH[0]=AAA-0" in feats and "SHC[0]=A-0" in feats


def test_other_templates(tcf):
    cfg = FeatureConfig.preset("genia")
    feats = input_features(tcf, 2, cfg)
    assert "PRE3=TCF" in feats and "SUF2=-1" in feats and "PRE6=TCF-1" not in feats
    assert "WG[-1,2]=human|TCF-1" in feats and "PG[0,2]=NN|NN" in feats
    assert "BOW=the" in feats and "BOW=TCF-1" not in feats
    ace = input_features(tcf, 2, FeatureConfig.preset("ace"))
    assert {"OR=allCaps", "OR=initCap", "OR=hasDigit", "OR=hasHyphen", "OR=hasPunct"} <= set(ace)
    assert all(" " not in f for f in feats + ace)
    assert len(feats) == len(set(feats))


def test_brown_features(tmp_path, tcf):
    path = tmp_path / "paths"
    path.write_text("0010\tprotein\t42\n110100\thuman\t7\n")
    clusters = load_brown_clusters(path)
    assert clusters["protein"] == "0010"
    assert clusters["nonexistent"] == "<UNK>"
    feats = input_features(tcf, 2, FeatureConfig.preset("genia"), clusters)
    assert {"BC[+1]=0010", "BC[-1]=110100", "BC4[-1]=1101", "BC6[-1]=110100", "BC[0]=<UNK>"} <= set(feats)
    empty = tmp_path / "empty"
    empty.write_text("")
    assert load_brown_clusters(empty)["x"] == "<UNK>"
    bad = tmp_path / "bad"
    bad.write_text("0010\tprotein\t42\nnot bits\n")
    with pytest.raises(FormatError, match="line 2"):
        load_brown_clusters(bad)


def test_presets_and_config_file(tmp_path):
    assert PRESETS["ace"].word_window == 3 and PRESETS["genia"].word_window == 2
    assert PRESETS["genia"].affix_max == 6 and PRESETS["conll"].affix_max == 5
    cfg_file = tmp_path / "f.cfg"
    cfg_file.write_text("# comment\ntemplate_set = genia\nword_window = 1  # narrower\northographic = true\n")
    cfg = load_config(cfg_file)
    assert cfg.template_set == "genia" and cfg.word_window == 1 and cfg.orthographic and cfg.affix_max == 6
    assert FeatureConfig.from_dict(cfg.as_dict()) == cfg
    cfg_file.write_text("bogus = 1\n")
    with pytest.raises(FormatError, match="line 1"):
        load_config(cfg_file)
    with pytest.raises(ValueError):
        FeatureConfig.preset("nope")


def test_penalty_only_vector():
    s = make_sentence(["a"])
    net = build("edge", s, ["P"])
    fd = FeatureDictionary().freeze()
    marked = [i for i, e in enumerate(net.edges) if e.penalty]
    assert edge_features(net, marked[0], fd, WORD_ONLY) == [(0, 1)]
    unmarked = [i for i, e in enumerate(net.edges) if not e.penalty]
    assert edge_features(net, unmarked[0], fd, WORD_ONLY) == []


def test_cs_edge_counting(tcf):
    cfg = FeatureConfig.preset("ace")
    net = build("edge", tcf, ["PROT"])
    e = next(i for i, x in enumerate(net.edges) if x.label == "CS" and x.position == 2)
    fd = FeatureDictionary()
    vec = edge_features(net, e, fd, cfg)
    n_inputs = 1 + len(input_features(tcf, 1, cfg)) + len(input_features(tcf, 2, cfg))
    assert len(vec) == n_inputs + 1  # CS opens a mention: penalty-marked
    names = fd.feature_strings()
    assert all(names[i].endswith("#label=CS#chain=PROT") for i, _ in vec if i)
    assert edge_features(net, e, fd, cfg) == vec


def test_dictionary_by_hand():
    s = make_sentence(["a"])
    fd = build_dictionary(Corpus([s], ("P",)), "edge", WORD_ONLY)
    gap0 = ["BIAS", "L|<BEGIN>", "R|W[0]=a"]
    gap1 = ["BIAS", "L|W[0]=a", "R|<END>"]
    expected = (
        {f"{i}#label=X#chain=P" for i in gap0 + gap1}
        | {f"{i}#label=S#chain=P" for i in gap0}
        | {f"{i}#label=E#chain=P" for i in gap1}
    )
    assert len(fd) == 1 + len(expected) == 12
    assert set(fd.feature_strings()[1:]) == expected


def test_empty_corpus_dictionary():
    fd = build_dictionary(Corpus(), "edge", WORD_ONLY, labels=("P",))
    assert len(fd) == 1 and fd.feature_strings() == ["<PENALTY>"]


@pytest.mark.parametrize("scheme", ["lcrf-single", "lcrf-multi", "state", "edge", "hypergraph"])
def test_determinism_and_frozen_safety(scheme, rng):
    train = random_corpus(rng, num=4)
    test = random_corpus(rng, num=4, vocab="x y a".split())
    cfg = FeatureConfig.preset("ace")
    a = build_dictionary(train, scheme, cfg)
    b = build_dictionary(train, scheme, cfg)
    assert a == b and a.feature_strings() == b.feature_strings()
    size = len(a)
    for s in test:
        feature_matrix(build(scheme, s, train.labels), a, cfg)
    assert len(a) == size
    assert FeatureDictionary.from_dict(a.to_dict()) == a


@pytest.mark.parametrize("scheme", ["state", "edge", "hypergraph"])
def test_gold_coverage(scheme, rng):
    corpus = random_corpus(rng, num=4)
    cfg = FeatureConfig.preset("ace")
    fd = build_dictionary(corpus, scheme, cfg)
    for s in corpus:
        net = build(scheme, s, corpus.labels)
        mat = feature_matrix(net, fd, cfg)
        for e in gold_structure(net).edges:
            assert mat[e].nnz > 0


def test_matrix_matches_edge_features(tcf):
    cfg = FeatureConfig.preset("conll")
    corpus = Corpus([tcf])
    for scheme in ("edge", "hypergraph", "lcrf-multi"):
        fd = build_dictionary(corpus, scheme, cfg, labels=("PROT", "DNA"))
        net = build(scheme, tcf, ("PROT", "DNA"))
        mat = feature_matrix(net, fd, cfg).toarray()
        for e in range(0, len(net.edges), 7):
            dense = np.zeros(len(fd))
            for i, c in edge_features(net, e, fd, cfg):
                dense[i] = c
            assert np.array_equal(mat[e], dense)
        assert np.all(mat[:, 0] == [e.penalty for e in net.edges])
