"""Executable demonstrations: spurious hypergraph mass and separator uniqueness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from . import codec
from .corpus import Sentence, Token
from .errors import EnumerationLimitError
from .evaluation import format_key_values
from .inference import brute_force_logZ, enumerate_structures, inside
from .networks import LEAF, ROOT, Edge, Network

EDGE_NAMES = ("A", "B", "C", "D", "E", "F")
MAX_UNIQUENESS_LENGTH = 5


def restricted_hypergraph() -> Network:
    """Three-token hypergraph where node I1 has two parents and three ways out.

    The named edges are A = T1->I1, B = I0->I1, C = I1->I2, D = I1->X,
    E = I1->(I2, X) and F = I2->X; the rest is scaffolding from the root.
    """
    nodes = [ROOT, ("A", 1), ("E", 0), ("T", 0, 0), ("I", 0, 0), ("E", 1), ("T", 1, 0), ("I", 1, 0), ("I", 2, 0), LEAF]
    ix = {role: i for i, role in enumerate(nodes)}

    def e(parent, children, label):
        return Edge(ix[parent], tuple(ix[c] for c in children), label, type_index=0)

    edges = [
        e(ROOT, [("A", 1), ("E", 0)], "A>AE"),
        e(("A", 1), [("E", 1)], "A>E"),
        e(("E", 0), [("T", 0, 0)], "E>T"),
        e(("T", 0, 0), [("I", 0, 0)], "T>I"),
        e(("I", 0, 0), [("I", 1, 0)], "B"),
        e(("E", 1), [("T", 1, 0)], "E>T"),
        e(("T", 1, 0), [("I", 1, 0)], "A"),
        e(("I", 1, 0), [("I", 2, 0)], "C"),
        e(("I", 1, 0), [LEAF], "D"),
        e(("I", 1, 0), [("I", 2, 0), LEAF], "E"),
        e(("I", 2, 0), [LEAF], "F"),
    ]
    sentence = Sentence(tuple(Token(w) for w in ("an", "Apache", "helicopter")), ())
    return Network("hypergraph", sentence, ("VEH",), nodes, edges, ix[ROOT], ix[LEAF])


def edge_potentials(network: Network, weights: Sequence[float] | None) -> np.ndarray:
    """Per-edge scores: named edges take ``weights`` in A..F order, scaffolding 0."""
    w = np.zeros(len(EDGE_NAMES)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(EDGE_NAMES),):
        raise ValueError("expected six weights for edges A..F")
    by_name = dict(zip(EDGE_NAMES, w))
    return np.array([by_name.get(e.label, 0.0) for e in network.edges])


def enumerate_unfoldings(network: Network, limit: int = 10**6) -> list[tuple[int, ...]]:
    """Every term of the inside recursion, as an edge multiset (sorted tuple).

    Each occurrence of a node picks its outgoing edge independently, which
    is exactly what the inside pass sums over.
    """
    memo: dict[int, list[tuple[int, ...]]] = {}

    def unfold(v):
        if v == network.leaf:
            return [()]
        if v in memo:
            return memo[v]
        out = []
        for e in network.out_edges[v]:
            for parts in product(*(unfold(c) for c in network.edges[e].children)):
                out.append(tuple(sorted((e,) + sum(parts, ()))))
                if len(out) > limit:
                    raise EnumerationLimitError(f"more than {limit} unfoldings")
        memo[v] = out
        return out

    return unfold(network.root)


@dataclass
class SpuriousReport:
    dp_log_z: float
    true_log_z: float
    hyperpaths: list[tuple[str, ...]]
    combinations: list[tuple[str, tuple[str, ...], tuple[str, ...], bool]]
    num_dp_terms: int
    weights: tuple[float, ...] = field(default=(0.0,) * 6)

    @property
    def spurious_mass(self) -> float:
        return math.exp(self.dp_log_z) - math.exp(self.true_log_z)

    def format(self) -> str:
        lines = [
            "restricted mention hypergraph, 3 tokens, 1 type",
            "weights " + " ".join(f"{n}={w:g}" for n, w in zip(EDGE_NAMES, self.weights)),
            "",
            "valid hyperpaths:",
        ]
        lines += ["  {" + ",".join(p) + "}" for p in self.hyperpaths]
        lines += ["", "combinations counted by the dynamic program (via A | via B):"]
        for tag, left, right, ok in self.combinations:
            lines.append(f"  ({tag}) {'-'.join(left):<6} | {'-'.join(right):<6} {'valid' if ok else 'spurious'}")
        lines.append("")
        lines.append(
            format_key_values(
                {
                    "Z_dp": math.exp(self.dp_log_z),
                    "Z_true": math.exp(self.true_log_z),
                    "logZ_dp": self.dp_log_z,
                    "logZ_true": self.true_log_z,
                    "spurious_mass": self.spurious_mass,
                    "hyperpaths": len(self.hyperpaths),
                    "dp_terms": self.num_dp_terms,
                }
            )
        )
        return "\n".join(lines) + "\n"


def _named(network, edges) -> tuple[str, ...]:
    return tuple(sorted({network.edges[e].label for e in edges} & set(EDGE_NAMES)))


def demo_spurious(weights: Sequence[float] | None = None) -> SpuriousReport:
    net = restricted_hypergraph()
    theta = edge_potentials(net, weights)
    dp = inside(net, theta).logZ
    true = brute_force_logZ(net, theta)
    paths = [_named(net, s) for s, _ in enumerate_structures(net)]
    # I1's subtree is chosen once below A and once below B
    i1 = net.node_index[("I", 1, 0)]
    below = []
    for e in net.out_edges[i1]:
        tail = [net.edges[e].label] + (["F"] if any(net.nodes[c][0] == "I" for c in net.edges[e].children) else [])
        below.append(tuple(tail))
    combos = []
    for k, (left, right) in enumerate(product(below, below)):
        combos.append((chr(ord("a") + k), ("A",) + left, ("B",) + right, left == right))
    terms = len(enumerate_unfoldings(net))
    w = tuple(float(x) for x in (weights if weights is not None else (0.0,) * 6))
    return SpuriousReport(dp, true, paths, combos, terms, w)


@dataclass
class UniquenessReport:
    n: int
    num_span_sets: int
    num_images: int
    num_valid: int
    transfer_count: int
    total: bool
    single_valued: bool
    roundtrip: bool

    @property
    def bijective(self) -> bool:
        return self.num_span_sets == self.num_images == self.num_valid

    def format(self) -> str:
        head = (
            f"n={self.n}: {self.num_span_sets} span sets -> {self.num_images} distinct sequences; "
            f"{self.num_valid} valid sequences (transfer matrix {self.transfer_count})"
        )
        kv = {
            "n": self.n,
            "span_sets": self.num_span_sets,
            "images": self.num_images,
            "valid_sequences": self.num_valid,
            "transfer_count": self.transfer_count,
            "total": str(self.total).lower(),
            "single_valued": str(self.single_valued).lower(),
            "roundtrip": str(self.roundtrip).lower(),
            "bijective": str(self.bijective).lower(),
        }
        return head + "\n\n" + format_key_values(kv) + "\n"


def demo_uniqueness(n: int) -> UniquenessReport:
    """Encode every span set of an ``n``-token sentence and compare image sizes."""
    if n < 1:
        raise ValueError("need at least one token")
    if n > MAX_UNIQUENESS_LENGTH:
        raise EnumerationLimitError(f"n={n} exceeds the bound {MAX_UNIQUENESS_LENGTH}")
    total = single = True
    images = set()
    count = 0
    for spans in codec.all_span_sets(n):
        count += 1
        seq = codec.encode(n, spans)
        total &= codec.is_valid(seq)
        single &= codec.encode(n, sorted(spans, reverse=True)) == seq
        images.add(tuple(seq))
    valid = codec.enumerate_valid_sequences(n)
    roundtrip = all(codec.encode(n, codec.interpret(s)) == s for s in valid)
    return UniquenessReport(
        n, count, len(images), len(valid), codec.transfer_matrix_count(n), total, single, roundtrip
    )
