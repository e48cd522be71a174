"""Regularized log-likelihood training with L-BFGS, and the model container.

The objective over a corpus ``D`` is::

    L(w) = sum_{(x, y) in D} [ score_w(y) - log Z_w(x) ] - lambda * ||w||^2

with ``score_w(y) = sum_e mult_y(e) * w . f(e)``.  On chain networks every
edge of a structure is used once; on the mention hypergraph a shared node's
subtree is unfolded once per parent, matching what its inside pass scores.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import line_search

from . import __version__
from .corpus import Corpus, Mention, Sentence
from .errors import CapacityError, FormatError
from .features import (
    BrownClusterMap,
    FeatureConfig,
    FeatureDictionary,
    SentenceFeatures,
    build_dictionary,
    feature_matrix,
)
from .inference import Lattice, decode, inside, outside_and_marginals
from .networks import build, gold_structure, read_structure, reduce_to_capacity

log = logging.getLogger(__name__)

MODEL_FORMAT = "sepmark-model"
MODEL_VERSION = 1
# sentences per gradient chunk; fixed so results do not depend on thread count
CHUNK_SIZE = 256
LAMBDA_SWEEP = (0.0, 0.001, 0.01, 0.1, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 0.01
    max_iterations: int = 200
    grad_tolerance: float = 1e-4
    history: int = 10
    seed: int = 0
    threads: int = 1
    # relative objective change below which training stops (0 disables)
    obj_tolerance: float = 0.0
    # lcrf schemes: drop mentions they cannot hold instead of failing
    reduce_overlaps: bool = True

    def __post_init__(self):
        if self.l2 < 0:
            raise ValueError("l2 coefficient must be non-negative")
        if self.max_iterations < 0 or self.history < 1:
            raise ValueError("max_iterations >= 0 and history >= 1 required")

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class ObjectiveReport:
    iteration: int
    objective: float
    grad_norm: float
    wall_time: float


@dataclass
class Model:
    scheme: str
    labels: tuple[str, ...]
    feature_config: FeatureConfig
    dictionary: FeatureDictionary
    weights: np.ndarray
    penalty_offset: float = 0.0
    clusters: BrownClusterMap | None = None
    train_config: TrainConfig | None = field(default=None, compare=False)

    def effective_weights(self, offset: float | None = None) -> np.ndarray:
        w = np.array(self.weights, dtype=float)
        w[0] += self.penalty_offset if offset is None else offset
        return w

    def __eq__(self, other):
        return (
            isinstance(other, Model)
            and self.scheme == other.scheme
            and self.labels == other.labels
            and self.feature_config == other.feature_config
            and self.dictionary == other.dictionary
            and np.array_equal(self.weights, other.weights)
            and self.penalty_offset == other.penalty_offset
            and dict(self.clusters or {}) == dict(other.clusters or {})
        )

    # -- prediction --------------------------------------------------------

    def prepare(self, sentences: Sequence[Sentence]) -> list["_Chunk"]:
        return _prepare(sentences, self.scheme, self.labels, self.dictionary, self.feature_config, self.clusters)

    def predict(self, corpus, offset: float | None = None, chunks=None) -> list[set[Mention]]:
        """Decoded mention sets, one per sentence (empty for empty sentences)."""
        sentences = list(corpus)
        chunks = chunks if chunks is not None else self.prepare(sentences)
        w = self.effective_weights(offset)
        found = {}
        for chunk in chunks:
            results = decode(chunk.lattice, chunk.features @ w)
            for i, res in zip(chunk.index, results):
                found[i] = read_structure(res.structure)
        return [found.get(i, set()) for i in range(len(sentences))]

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "library": __version__,
            "scheme": self.scheme,
            "labels": list(self.labels),
            "feature_config": self.feature_config.as_dict(),
            "penalty_offset": float(self.penalty_offset),
            "clusters": sorted(self.clusters.items()) if self.clusters else None,
            "dictionary": self.dictionary.to_dict(),
            "weights": [float(x) for x in self.weights],
        }
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "Model":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"model file is not valid JSON: {exc}") from None
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise FormatError("not a sepmark model file (or unsupported version)")
        clusters = BrownClusterMap(doc["clusters"]) if doc["clusters"] else None
        return cls(
            scheme=doc["scheme"],
            labels=tuple(doc["labels"]),
            feature_config=FeatureConfig.from_dict(doc["feature_config"]),
            dictionary=FeatureDictionary.from_dict(doc["dictionary"]),
            weights=np.array(doc["weights"], dtype=float),
            penalty_offset=float(doc["penalty_offset"]),
            clusters=clusters,
        )

    @classmethod
    def load(cls, path) -> "Model":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# objective


@dataclass
class _Chunk:
    index: list[int]
    lattice: Lattice
    features: sp.csr_matrix
    gold: np.ndarray | None = None
    gold_features: np.ndarray | None = None


def _prepare(sentences, scheme, labels, dictionary, config, clusters, gold=False, reduce_overlaps=True):
    chunks = []
    dropped = [0, 0]
    todo = [(i, s) for i, s in enumerate(sentences) if len(s)]
    for lo in range(0, len(todo), CHUNK_SIZE):
        part = todo[lo : lo + CHUNK_SIZE]
        nets, mats, golds = [], [], []
        for i, s in part:
            net = build(scheme, s, labels, config.penalty_placement)
            nets.append(net)
            mats.append(feature_matrix(net, dictionary, config, clusters, SentenceFeatures(s, config, clusters)))
            if gold:
                target = s
                if reduce_overlaps:
                    kept = reduce_to_capacity(scheme, s.mentions)
                    if len(kept) != len(s.mentions):
                        log.debug(
                            "sentence %s: %s dropped %d mention(s) it cannot represent",
                            s.id or i, scheme, len(s.mentions) - len(kept),
                        )
                        dropped[0] += 1
                        dropped[1] += len(s.mentions) - len(kept)
                        target = s.with_mentions(kept)
                golds.append(gold_structure(net, target).multiplicities())
        chunk = _Chunk([i for i, _ in part], Lattice(nets), sp.vstack(mats, format="csr"))
        if gold:
            chunk.gold = np.concatenate(golds).astype(float)
            chunk.gold_features = np.asarray(chunk.features.T @ chunk.gold).ravel()
        chunks.append(chunk)
    if dropped[0]:
        log.warning("%s dropped %d mention(s) it cannot represent in %d sentence(s)", scheme, dropped[1], dropped[0])
    return chunks


def _chunk_terms(chunk: _Chunk, w):
    theta = chunk.features @ w
    marg, tables = outside_and_marginals(chunk.lattice, theta)
    value = float(chunk.gold @ theta - tables.log_z.sum())
    grad = chunk.gold_features - np.asarray(chunk.features.T @ marg).ravel()
    return value, grad


def _objective(chunks, w, l2, threads=1):
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _chunk_terms(c, w), chunks))
    else:
        parts = [_chunk_terms(c, w) for c in chunks]
    value = -l2 * float(w @ w)
    grad = -2.0 * l2 * w
    for v, g in parts:  # fixed reduction order
        value += v
        grad = grad + g
    return value, grad


class TrainingProblem:
    """Networks, feature matrices and gold multiplicities of a training corpus."""

    def __init__(self, corpus, scheme, dictionary, config, clusters=None, labels=None, reduce_overlaps=True):
        self.labels = tuple(labels) if labels is not None else corpus.labels
        if not self.labels:
            raise ValueError("corpus declares no mention types")
        self.scheme = scheme
        self.dictionary = dictionary
        self.chunks = _prepare(
            list(corpus), scheme, self.labels, dictionary, config, clusters, gold=True, reduce_overlaps=reduce_overlaps
        )

    @property
    def dim(self) -> int:
        return len(self.dictionary)

    def objective_and_gradient(self, w, l2, threads=1):
        return _objective(self.chunks, np.asarray(w, dtype=float), l2, threads)


def objective_and_gradient(corpus, model: Model, l2: float, reduce_overlaps: bool = False):
    """Value and gradient of the regularized log-likelihood at ``model.weights``."""
    problem = TrainingProblem(
        corpus, model.scheme, model.dictionary, model.feature_config, model.clusters, model.labels, reduce_overlaps
    )
    return problem.objective_and_gradient(model.weights, l2)


def finite_difference_check(corpus, model: Model, epsilon: float = 1e-4, l2: float = 0.0,
                            coordinates=None, floor: float = 1e-3, reduce_overlaps: bool = False) -> float:
    """Largest per-coordinate relative error between analytic and central-difference gradients.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    problem = TrainingProblem(
        corpus, model.scheme, model.dictionary, model.feature_config, model.clusters, model.labels, reduce_overlaps
    )
    w = np.asarray(model.weights, dtype=float)
    _, grad = problem.objective_and_gradient(w, l2)
    coords = range(len(w)) if coordinates is None else coordinates
    worst = 0.0
    for j in coords:
        step = np.zeros_like(w)
        step[j] = epsilon
        up, _ = problem.objective_and_gradient(w + step, l2)
        down, _ = problem.objective_and_gradient(w - step, l2)
        num = (up - down) / (2 * epsilon)
        err = abs(grad[j] - num) / max(abs(grad[j]), abs(num), floor)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# L-BFGS


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((a, rho))
        q -= a * y
    if S:
        s, y = S[-1], Y[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (a, rho) in zip(zip(S, Y), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


class _Memo:
    """Caches (f, g) at recently visited points; the line search asks for both."""

    def __init__(self, fun):
        self.fun = fun
        self.cache = deque(maxlen=8)

    def __call__(self, x):
        for key, val in self.cache:
            if np.array_equal(key, x):
                return val
        val = self.fun(x)
        self.cache.append((x.copy(), val))
        return val

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def minimize_lbfgs(fun, x0, max_iter=200, gtol=1e-4, history=10, ftol=0.0, callback=None):
    """Minimize ``fun(x) -> (f, grad)`` with L-BFGS and a strong-Wolfe line search.

    Returns ``(x, f, g, converged)``.  ``callback(it, x, f, g)`` runs after
    every accepted step (and once at the start with ``it = 0``).
    """
    memo = _Memo(fun)
    x = np.asarray(x0, dtype=float).copy()
    f, g = memo(x)
    S, Y = deque(maxlen=history), deque(maxlen=history)
    if callback:
        callback(0, x, f, g)
    old_f = None
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= gtol:
            return x, f, g, True
        d = -_two_loop(g, S, Y) if S else -g / max(gnorm, 1.0)
        if g @ d >= 0:
            S.clear()
            Y.clear()
            d = -g / max(gnorm, 1.0)
        with warnings.catch_warnings():
            # a failed search is handled below by the backtracking fallback
            warnings.filterwarnings("ignore", message=".*line search.*")
            alpha, *_ = line_search(
                memo.f, memo.g, x, d, gfk=g, old_fval=f, old_old_fval=old_f, c1=1e-4, c2=0.9, maxiter=20
            )
        if alpha is None:
            alpha = _backtrack(memo, x, f, g, d)
            if alpha is None:
                log.warning("line search failed at iteration %d; stopping with the best iterate", it)
                return x, f, g, False
        x_new = x + alpha * d
        f_new, g_new = memo(x_new)
        if f_new > f:
            log.warning("line search returned an ascent step at iteration %d; stopping", it)
            return x, f, g, False
        s, y = x_new - x, g_new - g
        if s @ y > 1e-12:
            S.append(s)
            Y.append(y)
        old_f = f
        x, f, g = x_new, f_new, g_new
        if callback:
            callback(it, x, f, g)
        if ftol > 0 and abs(old_f - f) <= ftol * max(abs(f), 1.0):
            return x, f, g, True
    return x, f, g, float(np.linalg.norm(g)) <= gtol


def _backtrack(memo, x, f, g, d, c1=1e-4):
    slope = g @ d
    alpha = 1.0
    for _ in range(40):
        if memo.f(x + alpha * d) <= f + c1 * alpha * slope:
            return alpha
        alpha *= 0.5
    return None


def train(corpus: Corpus, scheme: str, feature_config: FeatureConfig, train_config: TrainConfig = TrainConfig(),
          clusters=None, labels=None, dictionary: FeatureDictionary | None = None):
    """Fit a model by maximizing the regularized log-likelihood from w = 0.

    Returns ``(model, reports)`` where ``reports`` has one entry per accepted
    iteration, starting with iteration 0 at the zero vector.
    """
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    labels = tuple(labels) if labels is not None else corpus.labels
    if dictionary is None:
        dictionary = build_dictionary(corpus, scheme, feature_config, clusters, labels)
    problem = TrainingProblem(
        corpus, scheme, dictionary, feature_config, clusters, labels, train_config.reduce_overlaps
    )
    cfg = train_config
    reports: list[ObjectiveReport] = []
    t0 = time.perf_counter()

    def neg(w):
        v, g = problem.objective_and_gradient(w, cfg.l2, cfg.threads)
        return -v, -g

    def record(it, w, f, g):
        reports.append(ObjectiveReport(it, -f, float(np.linalg.norm(g)), time.perf_counter() - t0))
        log.info("iter %d objective %.6f |grad| %.3g", it, -f, reports[-1].grad_norm)

    w, *_ = minimize_lbfgs(
        neg, np.zeros(problem.dim), cfg.max_iterations, cfg.grad_tolerance, cfg.history, cfg.obj_tolerance, record
    )
    model = Model(scheme, labels, feature_config, dictionary, w, 0.0, clusters, train_config)
    return model, reports


def check_trainable(corpus, scheme, labels=None):
    """Raise :class:`CapacityError` if some gold annotation does not fit the scheme."""
    from .networks import check_capacity

    labels = tuple(labels) if labels is not None else corpus.labels
    for s in corpus:
        try:
            check_capacity(scheme, s.mentions, labels)
        except CapacityError as exc:
            raise CapacityError(f"sentence {s.id}: {exc}", exc.pair) from None
