"""Feature templates, the feature dictionary, and per-network feature matrices.

Edge features are string concatenations ``input#output``: an *input*
feature read off the sentence around an anchor position, and an *output*
descriptor naming what the edge asserts (separator label, tag transition,
hyperedge kind) together with its type chain.  Index 0 is reserved for the
mention penalty.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import Sentence
from .errors import FormatError
from .networks import Network, build

PENALTY = "<PENALTY>"
BEGIN, END = "<BEGIN>", "<END>"
UNK_CLUSTER = "<UNK>"
_STRIDE = np.int64(1 << 24)


@dataclass(frozen=True)
class FeatureConfig:
    """Which input templates fire, and their window sizes (-1 disables)."""

    template_set: str = "ace"
    word_window: int = 3
    pos_window: int = 3
    ngram_max: int = 4
    bow_window: int = 5
    orthographic: bool = True
    shape_window: int = -1
    affix_max: int = 0
    brown_window: int = -1
    brown_file: str = ""
    # edge scheme only: "start" or "token" (see networks.attach_penalty)
    penalty_placement: str = "start"

    def __post_init__(self):
        if self.penalty_placement not in ("start", "token"):
            raise ValueError(f"penalty_placement must be 'start' or 'token', not {self.penalty_placement!r}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "FeatureConfig":
        if name not in PRESETS:
            raise ValueError(f"unknown template set {name!r}; expected one of {sorted(PRESETS)}")
        return replace(PRESETS[name], **overrides)

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "FeatureConfig":
        return cls(**d)


PRESETS = {
    "ace": FeatureConfig("ace", 3, 3, 4, 5, True, -1, 0, -1),
    "genia": FeatureConfig("genia", 2, 2, 4, 5, False, 0, 6, 1),
    "conll": FeatureConfig("conll", 2, 2, 4, 5, True, 2, 5, -1),
}


def load_config(path) -> FeatureConfig:
    """Read a ``key = value`` config file.

    ``template_set`` picks the preset that the remaining keys override.
    Blank lines and ``#`` comments are ignored.
    """
    values = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise FormatError(f"expected key = value, got {raw!r}", i)
        values[key] = (value, i)
    base = values.pop("template_set", ("ace", 0))[0]
    config = FeatureConfig.preset(base)
    types = {f.name: f.type for f in fields(FeatureConfig)}
    overrides = {}
    for key, (value, line) in values.items():
        if key not in types:
            raise FormatError(f"unknown config key {key!r}", line)
        kind = types[key]
        try:
            if kind in ("int", int):
                overrides[key] = int(value)
            elif kind in ("bool", bool):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                overrides[key] = value.lower() in ("true", "1", "yes")
            else:
                overrides[key] = value
        except ValueError:
            raise FormatError(f"bad value {value!r} for {key}", line) from None
    return replace(config, **overrides)


# ---------------------------------------------------------------------------
# Brown clusters


class BrownClusterMap(dict):
    """word -> bit-string cluster id; absent words map to ``<UNK>``."""

    def __missing__(self, word):
        return UNK_CLUSTER

    @property
    def num_clusters(self) -> int:
        return len(set(self.values()))


def load_brown_clusters(path) -> BrownClusterMap:
    clusters = BrownClusterMap()
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0] or not set(parts[0]) <= {"0", "1"}:
            raise FormatError(f"malformed cluster line {line!r}", i)
        try:
            int(parts[2])
        except ValueError:
            raise FormatError(f"bad frequency in {line!r}", i) from None
        clusters[parts[1]] = parts[0]
    return clusters


# ---------------------------------------------------------------------------
# input templates


def word_shape(word: str) -> str:
    out = []
    for ch in word:
        if ch.isupper():
            out.append("A")
        elif ch.islower():
            out.append("a")
        elif ch.isdigit():
            out.append("0")
        else:
            out.append(ch)
    return "".join(out)


def compress_shape(shape: str) -> str:
    return re.sub(r"(.)\1+", r"\1", shape)


def orthographic(word: str) -> list[str]:
    letters = [c for c in word if c.isalpha()]
    flags = {
        "allCaps": bool(letters) and all(c.isupper() for c in letters),
        "initCap": word[:1].isupper(),
        "hasDigit": any(c.isdigit() for c in word),
        "hasHyphen": "-" in word,
        "allDigits": word.isdigit(),
        "hasPunct": any(not c.isalnum() for c in word),
    }
    return [name for name, on in flags.items() if on]


def _off(d: int) -> str:
    return f"{d:+d}" if d else "0"


class SentenceFeatures:
    """Input feature strings of one sentence, computed once per anchor."""

    def __init__(self, sentence: Sentence, config: FeatureConfig, clusters=None):
        self.sentence = sentence
        self.config = config
        self.clusters = clusters
        self.words = sentence.words
        self.tags = [t.pos for t in sentence.tokens]
        self._word_cache: dict[int, list[str]] = {}

    def _w(self, i):
        if i < 0:
            return BEGIN
        if i >= len(self.words):
            return END
        return self.words[i]

    def _p(self, i):
        if i < 0:
            return BEGIN
        if i >= len(self.tags):
            return END
        return self.tags[i]

    def word(self, k: int) -> list[str]:
        if k not in self._word_cache:
            self._word_cache[k] = input_features(self.sentence, k, self.config, self.clusters, self)
        return self._word_cache[k]

    def gap(self, g: int) -> list[str]:
        """Features of the gap before token ``g``: both flanking words."""
        n = len(self.words)
        left = [f"L|{f}" for f in self.word(g - 1)] if g > 0 else [f"L|{BEGIN}"]
        right = [f"R|{f}" for f in self.word(g)] if g < n else [f"R|{END}"]
        return ["BIAS"] + left + right

    def anchor(self, kind: str, pos: int) -> list[str]:
        if kind == "word":
            return ["BIAS"] + self.word(pos)
        if kind == "gap":
            return self.gap(pos)
        if kind == "bias":
            return ["BIAS"]
        raise ValueError(f"unknown anchor kind {kind!r}")


def input_features(sentence: Sentence, k: int, config: FeatureConfig, clusters=None, _sf=None) -> list[str]:
    """Deterministic input feature strings for token ``k``."""
    sf = _sf or SentenceFeatures(sentence, config, clusters)
    c = config
    out = []
    for d in range(-c.word_window, c.word_window + 1):
        out.append(f"W[{_off(d)}]={sf._w(k + d)}")
    for d in range(-c.pos_window, c.pos_window + 1):
        out.append(f"P[{_off(d)}]={sf._p(k + d)}")
    for length in range(2, c.ngram_max + 1):
        for s in range(-(length - 1), 1):
            ws = "|".join(sf._w(k + s + j) for j in range(length))
            ps = "|".join(sf._p(k + s + j) for j in range(length))
            out.append(f"WG[{_off(s)},{length}]={ws}")
            out.append(f"PG[{_off(s)},{length}]={ps}")
    if c.bow_window > 0:
        bag = sorted(
            {sf.words[k + d] for d in range(-c.bow_window, c.bow_window + 1) if d and 0 <= k + d < len(sf.words)}
        )
        out.extend(f"BOW={w}" for w in bag)
    word = sf.words[k]
    if c.orthographic:
        out.extend(f"OR={name}" for name in orthographic(word))
    if c.shape_window >= 0:
        for d in range(-c.shape_window, c.shape_window + 1):
            w = sf._w(k + d)
            shape = w if w in (BEGIN, END) else word_shape(w)
            out.append(f"SH[{_off(d)}]={shape}")
            out.append(f"SHC[{_off(d)}]={compress_shape(shape)}")
    for length in range(1, min(c.affix_max, len(word)) + 1):
        out.append(f"PRE{length}={word[:length]}")
        out.append(f"SUF{length}={word[-length:]}")
    if c.brown_window >= 0 and clusters is not None:
        for d in range(-c.brown_window, c.brown_window + 1):
            w = sf._w(k + d)
            bits = w if w in (BEGIN, END) else clusters[w]
            out.append(f"BC[{_off(d)}]={bits}")
            out.append(f"BC4[{_off(d)}]={bits[:4]}")
            out.append(f"BC6[{_off(d)}]={bits[:6]}")
    return list(dict.fromkeys(out))


# ---------------------------------------------------------------------------
# dictionary


class FeatureDictionary:
    """Feature string -> dense index; index 0 is the mention penalty.

    Features are (input, output) string pairs.  While unfrozen, lookups of
    unseen pairs allocate new indices; once frozen they return -1.
    """

    def __init__(self):
        self.inputs: dict[str, int] = {}
        self.outputs: dict[str, int] = {}
        self._pairs: dict[int, int] = {}
        self.frozen = False
        self._keys = np.zeros(0, dtype=np.int64)
        self._vals = np.zeros(0, dtype=np.int64)

    def __len__(self):
        return 1 + len(self._pairs)

    @property
    def size(self) -> int:
        return len(self)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureDictionary)
            and self.inputs == other.inputs
            and self.outputs == other.outputs
            and self._pairs == other._pairs
            and self.frozen == other.frozen
        )

    def _intern(self, table: dict, s: str) -> int:
        idx = table.get(s)
        if idx is None and not self.frozen:
            idx = table[s] = len(table)
        return -1 if idx is None else idx

    def input_ids(self, strings) -> np.ndarray:
        return np.fromiter((self._intern(self.inputs, s) for s in strings), dtype=np.int64)

    def output_id(self, s: str) -> int:
        return self._intern(self.outputs, s)

    def lookup_keys(self, keys: np.ndarray) -> np.ndarray:
        """Feature indices for packed (input, output) keys; -1 where absent."""
        keys = np.asarray(keys, dtype=np.int64)
        if self.frozen:
            if len(self._keys) == 0:
                return np.full(len(keys), -1, dtype=np.int64)
            pos = np.searchsorted(self._keys, keys)
            pos = np.minimum(pos, len(self._keys) - 1)
            hit = self._keys[pos] == keys
            return np.where(hit, self._vals[pos], -1)
        out = np.empty(len(keys), dtype=np.int64)
        for i, k in enumerate(keys.tolist()):
            idx = self._pairs.get(k)
            if idx is None:
                idx = self._pairs[k] = len(self._pairs) + 1
            out[i] = idx
        return out

    def add_keys_bulk(self, keys: np.ndarray) -> None:
        """Index unseen keys in order of first appearance."""
        if self.frozen:
            raise RuntimeError("dictionary is frozen")
        if len(keys) == 0:
            return
        uniq, first = np.unique(keys, return_index=True)
        for k in uniq[np.argsort(first, kind="stable")].tolist():
            if k not in self._pairs:
                self._pairs[k] = len(self._pairs) + 1

    def freeze(self) -> "FeatureDictionary":
        keys = np.fromiter(self._pairs.keys(), dtype=np.int64, count=len(self._pairs))
        vals = np.fromiter(self._pairs.values(), dtype=np.int64, count=len(self._pairs))
        order = np.argsort(keys)
        self._keys, self._vals = keys[order], vals[order]
        self.frozen = True
        return self

    @staticmethod
    def pack(in_ids, out_id):
        return np.asarray(in_ids, dtype=np.int64) * _STRIDE + np.int64(out_id)

    def feature_strings(self) -> list[str]:
        """All feature strings in index order (index 0 is the penalty)."""
        inputs = list(self.inputs)
        outputs = list(self.outputs)
        names = [PENALTY] + [""] * len(self._pairs)
        for key, idx in self._pairs.items():
            names[idx] = f"{inputs[key // int(_STRIDE)]}#{outputs[key % int(_STRIDE)]}"
        return names

    def index(self, feature: str) -> int:
        """Index of a full ``input#output`` string, or -1."""
        if feature == PENALTY:
            return 0
        if not hasattr(self, "_by_name") or len(self._by_name) != len(self):
            self._by_name = {s: i for i, s in enumerate(self.feature_strings())}
        return self._by_name.get(feature, -1)

    def to_dict(self):
        pairs = sorted(self._pairs.items(), key=lambda kv: kv[1])
        return {
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "pairs": [[k // int(_STRIDE), k % int(_STRIDE)] for k, _ in pairs],
        }

    @classmethod
    def from_dict(cls, d) -> "FeatureDictionary":
        fd = cls()
        fd.inputs = {s: i for i, s in enumerate(d["inputs"])}
        fd.outputs = {s: i for i, s in enumerate(d["outputs"])}
        fd._pairs = {int(a) * int(_STRIDE) + int(b): i + 1 for i, (a, b) in enumerate(d["pairs"])}
        return fd.freeze()


# ---------------------------------------------------------------------------
# feature extraction over networks


def _edge_keys(network: Network, dictionary: FeatureDictionary, sf: SentenceFeatures):
    """Row ids and packed keys for every (edge, input feature) combination."""
    groups: dict[tuple[str, int], tuple[list[int], list[int]]] = {}
    for e, edge in enumerate(network.edges):
        for kind, pos, output in edge.features:
            out_id = dictionary.output_id(output)
            if out_id < 0:
                continue
            rows, outs = groups.setdefault((kind, pos), ([], []))
            rows.append(e)
            outs.append(out_id)
    row_parts, key_parts = [], []
    for (kind, pos), (rows, outs) in groups.items():
        ids = dictionary.input_ids(sf.anchor(kind, pos))
        ids = ids[ids >= 0]
        if len(ids) == 0:
            continue
        keys = ids[None, :] * _STRIDE + np.asarray(outs, dtype=np.int64)[:, None]
        row_parts.append(np.repeat(np.asarray(rows, dtype=np.int64), len(ids)))
        key_parts.append(keys.ravel())
    if not row_parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(row_parts), np.concatenate(key_parts)


def feature_matrix(network: Network, dictionary: FeatureDictionary, config: FeatureConfig, clusters=None,
                   sentence_features: SentenceFeatures | None = None) -> sp.csr_matrix:
    """Sparse (num_edges x dictionary size) matrix of edge feature counts."""
    sf = sentence_features or SentenceFeatures(network.sentence, config, clusters)
    rows, keys = _edge_keys(network, dictionary, sf)
    cols = dictionary.lookup_keys(keys)
    keep = cols >= 0
    rows, cols = rows[keep], cols[keep]
    pen = np.array([e for e, edge in enumerate(network.edges) if edge.penalty], dtype=np.int64)
    rows = np.concatenate([pen, rows])
    cols = np.concatenate([np.zeros(len(pen), dtype=np.int64), cols])
    data = np.ones(len(rows))
    mat = sp.csr_matrix((data, (rows, cols)), shape=(len(network.edges), len(dictionary)))
    mat.sum_duplicates()
    return mat


def edge_features(network: Network, edge: int, dictionary: FeatureDictionary, config: FeatureConfig,
                  clusters=None) -> list[tuple[int, int]]:
    """Sorted ``(index, count)`` pairs for one edge."""
    sf = SentenceFeatures(network.sentence, config, clusters)
    e = network.edges[edge]
    counts: dict[int, int] = {}
    if e.penalty:
        counts[0] = 1
    for kind, pos, output in e.features:
        out_id = dictionary.output_id(output)
        if out_id < 0:
            continue
        ids = dictionary.input_ids(sf.anchor(kind, pos))
        ids = ids[ids >= 0]
        for idx in dictionary.lookup_keys(FeatureDictionary.pack(ids, out_id)).tolist():
            if idx >= 0:
                counts[idx] = counts.get(idx, 0) + 1
    return sorted(counts.items())


def build_dictionary(corpus, scheme: str, config: FeatureConfig, clusters=None, labels=None) -> FeatureDictionary:
    """Index every feature on every edge of every training network, then freeze."""
    labels = tuple(labels) if labels is not None else corpus.labels
    fd = FeatureDictionary()
    for sentence in corpus:
        if len(sentence) == 0:
            continue
        net = build(scheme, sentence, labels, config.penalty_placement)
        _, keys = _edge_keys(net, fd, SentenceFeatures(sentence, config, clusters))
        fd.add_keys_bulk(keys)
    return fd.freeze()
