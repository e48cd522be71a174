import logging
import math

import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from sepmark import learning
from sepmark.corpus import Corpus
from sepmark.errors import CapacityError, FormatError
from sepmark.features import FeatureConfig, build_dictionary, feature_matrix
from sepmark.inference import StructureTable
from sepmark.learning import (
    Model,
    TrainConfig,
    finite_difference_check,
    minimize_lbfgs,
    objective_and_gradient,
    train,
)
from sepmark.networks import SCHEMES, build, gold_structure, reduce_to_capacity

from conftest import make_sentence, random_corpus

CFG = FeatureConfig.preset("ace", word_window=1, pos_window=0, ngram_max=2, bow_window=2)


def zero_model(corpus, scheme, cfg=CFG):
    fd = build_dictionary(corpus, scheme, cfg)
    return Model(scheme, corpus.labels, cfg, fd, np.zeros(len(fd)))


def test_one_token_example():
    c = Corpus([make_sentence(["a"])], ("P",))
    m = zero_model(c, "edge")
    value, grad = objective_and_gradient(c, m, 0.0)
    assert value == pytest.approx(-math.log(2), abs=1e-12)
    assert grad[0] == pytest.approx(-0.5, abs=1e-12)


def test_regularizer_algebra():
    c = Corpus([make_sentence(["a", "b"], [(0, 0, "P")])], ("P",))
    m = zero_model(c, "edge")
    m.weights[0] = 1.0
    v0, g0 = objective_and_gradient(c, m, 0.0)
    v1, g1 = objective_and_gradient(c, m, 1.0)
    assert v1 - v0 == pytest.approx(-1.0)
    assert g1[0] - g0[0] == pytest.approx(-2.0)
    np.testing.assert_array_equal(g1[1:], g0[1:])


@pytest.mark.parametrize("scheme", ["lcrf-single", "lcrf-multi", "state", "edge"])
def test_objective_against_enumeration(scheme, rng):
    c = random_corpus(rng, num=3, max_len=3)
    m = zero_model(c, scheme)
    m.weights = rng.normal(size=len(m.weights)) * 0.5
    value, _ = objective_and_gradient(c, m, 0.0, reduce_overlaps=True)
    expected = 0.0
    for s in c:
        net = build(scheme, s, c.labels)
        theta = feature_matrix(net, m.dictionary, CFG) @ m.weights
        gold = gold_structure(net, s.with_mentions(reduce_to_capacity(scheme, s.mentions)))
        expected += gold.score(theta) - StructureTable(net).log_z(theta)
    assert value == pytest.approx(expected, abs=1e-9)
    assert value <= 0


@pytest.mark.parametrize("scheme", SCHEMES)
def test_gradient_finite_differences(scheme, rng):
    c = random_corpus(rng, num=3, max_len=4)
    m = zero_model(c, scheme)
    assert finite_difference_check(c, m, 1e-4, reduce_overlaps=True) <= 1e-4
    m.weights = rng.normal(size=len(m.weights)) * 0.3
    assert finite_difference_check(c, m, 1e-4, l2=0.1, reduce_overlaps=True) <= 1e-4


@pytest.mark.parametrize("scheme", ["edge", "hypergraph"])
def test_gradient_after_training(scheme, rng):
    c = random_corpus(rng, num=3, max_len=4)
    m, _ = train(c, scheme, CFG, TrainConfig(l2=0.1, max_iterations=10))
    assert finite_difference_check(c, m, 1e-4, l2=0.1) <= 1e-4


def test_epsilon_must_be_positive(rng):
    c = random_corpus(rng, num=1)
    with pytest.raises(ValueError):
        finite_difference_check(c, zero_model(c, "edge"), 0.0)


def test_zero_iterations(rng):
    c = random_corpus(rng)
    m, reports = train(c, "edge", CFG, TrainConfig(max_iterations=0))
    assert not m.weights.any()
    assert [r.iteration for r in reports] == [0]


@pytest.mark.parametrize("scheme", SCHEMES)
def test_training_monotone_and_improves(scheme, rng):
    c = random_corpus(rng, num=4)
    m, reports = train(c, scheme, CFG, TrainConfig(l2=0.1, max_iterations=25))
    objs = [r.objective for r in reports]
    assert all(b >= a for a, b in zip(objs, objs[1:]))
    assert objs[-1] > objs[0]
    assert np.all(np.isfinite(m.weights))
    assert [r.iteration for r in reports] == list(range(len(reports)))


def test_determinism_and_thread_independence(rng, monkeypatch):
    c = random_corpus(rng, num=7)
    a, _ = train(c, "state", CFG, TrainConfig(l2=0.01, max_iterations=15))
    b, _ = train(c, "state", CFG, TrainConfig(l2=0.01, max_iterations=15))
    assert a.to_json() == b.to_json()
    monkeypatch.setattr(learning, "CHUNK_SIZE", 2)
    t1, _ = train(c, "state", CFG, TrainConfig(l2=0.01, max_iterations=15, threads=1))
    t3, _ = train(c, "state", CFG, TrainConfig(l2=0.01, max_iterations=15, threads=3))
    assert np.array_equal(t1.weights, t3.weights)


def test_model_roundtrip(tmp_path, rng):
    c = random_corpus(rng)
    m, _ = train(c, "edge", CFG, TrainConfig(max_iterations=5))
    m.penalty_offset = 0.3
    path = tmp_path / "m.json"
    m.save(path)
    back = Model.load(path)
    assert back == m
    assert back.to_json() == m.to_json()
    assert np.array_equal(back.weights, m.weights)
    assert [x.hex() for x in back.weights] == [x.hex() for x in m.weights]
    assert back.predict(c) == m.predict(c)
    path.write_text("{}")
    with pytest.raises(FormatError):
        Model.load(path)
    path.write_text("nope")
    with pytest.raises(FormatError):
        Model.load(path)


def test_lcrf_capacity_policy(rng, caplog):
    c = Corpus([make_sentence(["a", "b"], [(0, 1, "P"), (1, 1, "P")])], ("P",))
    with pytest.raises(CapacityError):
        train(c, "lcrf-single", CFG, TrainConfig(max_iterations=1, reduce_overlaps=False))
    with caplog.at_level(logging.WARNING):
        train(c, "lcrf-single", CFG, TrainConfig(max_iterations=1))
    assert "dropped 1 mention" in caplog.text


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        train(Corpus(), "edge", CFG)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(l2=-1)
    assert learning.LAMBDA_SWEEP == (0.0, 0.001, 0.01, 0.1, 1.0)


def test_lbfgs_on_rosenbrock():
    x, f, g, ok = minimize_lbfgs(lambda x: (rosen(x), rosen_der(x)), np.zeros(5), max_iter=500, gtol=1e-8)
    assert ok
    np.testing.assert_allclose(x, np.ones(5), atol=1e-5)


def test_lbfgs_quadratic_exact():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(6, 6))
    h = a @ a.T + np.eye(6)
    b = rng.normal(size=6)
    x, *_ = minimize_lbfgs(lambda x: (0.5 * x @ h @ x - b @ x, h @ x - b), np.zeros(6), gtol=1e-10, max_iter=200)
    np.testing.assert_allclose(x, np.linalg.solve(h, b), atol=1e-8)


def test_lbfgs_line_search_failure_warns(caplog):
    # gradient points the wrong way: no step can satisfy sufficient decrease
    with caplog.at_level(logging.WARNING):
        x, f, g, ok = minimize_lbfgs(lambda x: (float(x @ x), -2 * x), np.ones(3), max_iter=5)
    assert not ok
    np.testing.assert_array_equal(x, np.ones(3))
    assert "stopping" in caplog.text


def test_predict_handles_empty_sentence(rng):
    c = random_corpus(rng)
    m, _ = train(c, "edge", CFG, TrainConfig(max_iterations=3))
    out = m.predict([make_sentence([]), c[0]])
    assert out[0] == set() and len(out) == 2
