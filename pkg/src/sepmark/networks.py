"""Scoring networks for the five model schemes.

Every scheme compiles a sentence into a directed acyclic (hyper)graph with
a single root and a single leaf.  A *structure* picks exactly one outgoing
edge for every node it reaches from the root; for plain graphs that is a
root-to-leaf path, for the mention hypergraph a hyperpath.

Schemes
-------
``lcrf-single``  one BILOU chain over all types
``lcrf-multi``   one BILOU chain per type
``state``        one chain per type whose states are the separators at each gap
``edge``         one chain per type with O/I word states; separators label
                 the (parallel) edges between consecutive positions
``hypergraph``   the A/E/T/I/X mention hypergraph

Multi-chain schemes compose their per-type chains in series (the end node
of chain ``t`` is the start node of chain ``t + 1``), so a structure is a
single path whose score is the sum of independent per-type path scores.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from . import codec
from .codec import Separator
from .corpus import Mention, Sentence
from .errors import CapacityError

SCHEMES = ("lcrf-single", "lcrf-multi", "state", "edge", "hypergraph")
CHAIN_SCHEMES = ("lcrf-single", "lcrf-multi", "state", "edge")

ROOT = ("root",)
LEAF = ("leaf",)


@dataclass(frozen=True)
class Edge:
    parent: int
    children: tuple[int, ...]
    label: str
    type_index: int = -1
    # anchor position for features: gap index (state/edge) or word index
    position: int = -1
    # (anchor kind, anchor position, output descriptor); kinds: word, gap, bias
    features: tuple[tuple[str, int, str], ...] = ()
    penalty: bool = False


@dataclass(frozen=True)
class Structure:
    network: "Network" = field(repr=False)
    edges: tuple[int, ...]

    def multiplicities(self) -> np.ndarray:
        return self.network.multiplicities(self.edges)

    def score(self, theta) -> float:
        return float(self.multiplicities() @ np.asarray(theta, dtype=float))

    def labels(self) -> list[str]:
        return [self.network.edges[e].label for e in self.edges]


class Network:
    """An immutable scoring network for one sentence."""

    def __init__(self, scheme, sentence, labels, nodes, edges, root, leaf):
        self.scheme = scheme
        self.sentence = sentence
        self.labels = tuple(labels)
        self.nodes = list(nodes)
        self.edges = list(edges)
        self.root = root
        self.leaf = leaf
        self.out_edges: list[list[int]] = [[] for _ in self.nodes]
        for i, e in enumerate(self.edges):
            self.out_edges[e.parent].append(i)
        self.node_index = {role: i for i, role in enumerate(self.nodes)}

    def __len__(self):
        return len(self.edges)

    @property
    def n(self) -> int:
        return len(self.sentence)

    @cached_property
    def heights(self) -> np.ndarray:
        h = np.zeros(len(self.nodes), dtype=np.int64)
        for v in range(len(self.nodes) - 1, -1, -1):
            outs = self.out_edges[v]
            if outs:
                h[v] = 1 + max(h[c] for e in outs for c in self.edges[e].children)
        return h

    def find_edge(self, parent: int, label: str, type_index: int | None = None) -> int:
        for e in self.out_edges[parent]:
            edge = self.edges[e]
            if edge.label == label and (type_index is None or edge.type_index == type_index):
                return e
        raise KeyError(f"no edge {label!r} out of node {self.nodes[parent]}")

    def multiplicities(self, chosen: Sequence[int]) -> np.ndarray:
        """How many times each edge is used when the hyperpath is unfolded."""
        choice = {}
        for e in chosen:
            p = self.edges[e].parent
            if p in choice:
                raise ValueError(f"node {self.nodes[p]} has two outgoing edges")
            choice[p] = e
        node_mult = np.zeros(len(self.nodes), dtype=np.int64)
        node_mult[self.root] = 1
        mult = np.zeros(len(self.edges), dtype=np.int64)
        # nodes are stored parents-first
        for v in range(len(self.nodes)):
            if node_mult[v] == 0 or v == self.leaf:
                continue
            if v not in choice:
                raise ValueError(f"reached node {self.nodes[v]} has no outgoing edge")
            e = choice[v]
            mult[e] += node_mult[v]
            for c in self.edges[e].children:
                node_mult[c] += node_mult[v]
        if len(choice) != int((mult > 0).sum()):
            raise ValueError("structure contains edges of unreached nodes")
        return mult

    def structure(self, chosen: Sequence[int]) -> Structure:
        order = sorted(chosen, key=lambda e: (self.edges[e].parent, e))
        self.multiplicities(order)
        return Structure(self, tuple(order))

    def dump(self) -> str:
        """One line per edge: ``parent -> [children] label typeIndex``."""
        lines = []
        for e in self.edges:
            kids = ", ".join(_fmt_role(self.nodes[c]) for c in e.children)
            mark = " *" if e.penalty else ""
            lines.append(f"{_fmt_role(self.nodes[e.parent])} -> [{kids}] {e.label} {e.type_index}{mark}")
        return "\n".join(lines) + "\n"


def _fmt_role(role) -> str:
    if len(role) == 1:
        return role[0]
    return f"{role[0]}({','.join(str(x) for x in role[1:])})"


class _Builder:
    def __init__(self):
        self.nodes: list[tuple] = []
        self.index: dict[tuple, int] = {}
        self.edges: list[Edge] = []

    def node(self, role) -> int:
        if role not in self.index:
            self.index[role] = len(self.nodes)
            self.nodes.append(role)
        return self.index[role]

    def edge(self, parent, children, label, **kw):
        p = self.node(parent)
        cs = tuple(self.node(c) for c in children)
        self.edges.append(Edge(p, cs, label, **kw))

    def finish(self, scheme, sentence, labels) -> Network:
        """Drop nodes that are unreachable or cannot reach the leaf, renumber."""
        if LEAF not in self.index:
            raise ValueError("network has no leaf")
        nodes, edges = self.nodes, self.edges
        out = defaultdict(list)
        for i, e in enumerate(edges):
            out[e.parent].append(i)
        # co-reachability: a node is alive if some edge has all children alive
        alive = [False] * len(nodes)
        alive[self.index[LEAF]] = True
        for v in range(len(nodes) - 1, -1, -1):
            if any(all(alive[c] for c in edges[i].children) for i in out[v]):
                alive[v] = True
        good = [i for i, e in enumerate(edges) if alive[e.parent] and all(alive[c] for c in e.children)]
        reach = [False] * len(nodes)
        reach[self.index[ROOT]] = True
        good_out = defaultdict(list)
        for i in good:
            good_out[edges[i].parent].append(i)
        for v in range(len(nodes)):
            if reach[v]:
                for i in good_out[v]:
                    for c in edges[i].children:
                        reach[c] = True
        keep = [v for v in range(len(nodes)) if reach[v] and alive[v]]
        # stored order must be parents-first; builders create nodes that way
        remap = {v: i for i, v in enumerate(keep)}
        new_edges = [
            replace(edges[i], parent=remap[edges[i].parent], children=tuple(remap[c] for c in edges[i].children))
            for i in good
            if reach[edges[i].parent]
        ]
        for e in new_edges:
            assert all(c > e.parent for c in e.children), "builder produced a non-topological order"
        new_nodes = [nodes[v] for v in keep]
        return Network(scheme, sentence, labels, new_nodes, new_edges, remap[self.index[ROOT]], remap[self.index[LEAF]])


# ---------------------------------------------------------------------------
# builders


def _chain_ends(t, T):
    start = ROOT if t == 0 else ("join", t - 1)
    end = LEAF if t == T - 1 else ("join", t)
    return start, end


def _build_edge(sentence, labels):
    n, T = len(sentence), len(labels)
    b = _Builder()
    b.node(ROOT)
    for t, label in enumerate(labels):
        start, end = _chain_ends(t, T)
        b.node(start)

        def feats(g, sep):
            return (("gap", g, f"label={sep.name}#chain={label}"),)

        for sep, state in ((Separator.X, "O"), (Separator.S, "I")):
            b.edge(start, [(state, 0, t)], sep.name, type_index=t, position=0, features=feats(0, sep))
        for g in range(1, n):
            for sep in codec.SEPARATORS:
                src = "I" if sep.prev_in else "O"
                dst = "I" if sep.next_in else "O"
                b.edge((src, g - 1, t), [(dst, g, t)], sep.name, type_index=t, position=g, features=feats(g, sep))
        for sep, state in ((Separator.X, "O"), (Separator.E, "I")):
            b.edge((state, n - 1, t), [end], sep.name, type_index=t, position=n, features=feats(n, sep))
    b.node(LEAF)
    return b.finish("edge", sentence, labels)


def _build_state(sentence, labels):
    n, T = len(sentence), len(labels)
    b = _Builder()
    b.node(ROOT)
    for t, label in enumerate(labels):
        start, end = _chain_ends(t, T)
        b.node(start)

        def allowed(g):
            if g == 0:
                return codec.FIRST_GAP
            if g == n:
                return codec.LAST_GAP
            return codec.SEPARATORS

        def feats(g, prev, cur):
            return (
                ("gap", g, f"label={cur}#chain={label}"),
                ("bias", 0, f"trans={prev}>{cur}#chain={label}"),
            )

        for sep in allowed(0):
            b.edge(start, [("sep", 0, t, sep.name)], f"^>{sep.name}", type_index=t, position=0,
                   features=feats(0, "^", sep.name))
        for g in range(1, n + 1):
            for prev in allowed(g - 1):
                for cur in allowed(g):
                    if prev.next_in != cur.prev_in:
                        continue
                    b.edge(("sep", g - 1, t, prev.name), [("sep", g, t, cur.name)], f"{prev.name}>{cur.name}",
                           type_index=t, position=g, features=feats(g, prev.name, cur.name))
        for sep in allowed(n):
            b.edge(("sep", n, t, sep.name), [end], f"{sep.name}>$", type_index=t, position=n + 1,
                   features=(("bias", 0, f"trans={sep.name}>$#chain={label}"),))
    b.node(LEAF)
    return b.finish("state", sentence, labels)


def _bilou_ok(prev: str, cur: str) -> bool:
    """Transition validity; tags are 'O', '^', '$' or 'B-x' style."""
    if prev in ("^", "O") or prev[0] in "LU":
        return cur in ("$", "O") or cur[0] in "BU"
    # prev is B or I: must continue the same type
    return cur != "$" and cur != "O" and cur[0] in "IL" and cur[2:] == prev[2:]


def _build_lcrf(sentence, labels, multi):
    n, T = len(sentence), len(labels)
    b = _Builder()
    b.node(ROOT)
    chains = [(t, [label]) for t, label in enumerate(labels)] if multi else [(0, list(labels))]
    for t, chain_labels in chains:
        start, end = _chain_ends(t, len(chains))
        b.node(start)
        tags = ["O"] + [f"{p}-{lab}" for lab in chain_labels for p in "BILU"]
        suffix = f"#chain={chain_labels[0]}" if multi else ""
        tidx = t if multi else -1

        def short(tag):
            return tag[0] if multi else tag

        def feats(k, prev, cur):
            return (
                ("word", k, f"tag={short(cur)}{suffix}"),
                ("bias", 0, f"trans={short(prev)}>{short(cur)}{suffix}"),
            )

        def node(k, tag):
            return ("tag", k, tidx, tag)

        for cur in tags:
            if _bilou_ok("^", cur):
                b.edge(start, [node(0, cur)], f"^>{short(cur)}", type_index=tidx, position=0,
                       features=feats(0, "^", cur))
        for k in range(1, n):
            for prev in tags:
                for cur in tags:
                    if _bilou_ok(prev, cur):
                        b.edge(node(k - 1, prev), [node(k, cur)], f"{short(prev)}>{short(cur)}",
                               type_index=tidx, position=k, features=feats(k, prev, cur))
        for prev in tags:
            if _bilou_ok(prev, "$"):
                b.edge(node(n - 1, prev), [end], f"{short(prev)}>$", type_index=tidx, position=n,
                       features=(("bias", 0, f"trans={short(prev)}>${suffix}"),))
    b.node(LEAF)
    return b.finish("lcrf-multi" if multi else "lcrf-single", sentence, labels)


def _build_hypergraph(sentence, labels):
    n, T = len(sentence), len(labels)
    b = _Builder()
    # A^0 is the root
    b.node(ROOT)
    a = lambda k: ROOT if k == 0 else ("A", k)  # noqa: E731
    for k in range(n):
        b.node(a(k))
        b.node(("E", k))
        for t in range(T):
            b.node(("T", k, t))
        for t in range(T):
            b.node(("I", k, t))
    b.node(LEAF)
    for k in range(n):
        if k + 1 < n:
            b.edge(a(k), [a(k + 1), ("E", k)], "A>AE", position=k, features=(("bias", 0, "hg=A>AE"),))
        else:
            b.edge(a(k), [("E", k)], "A>E", position=k, features=(("bias", 0, "hg=A>E"),))
        b.edge(("E", k), [("T", k, t) for t in range(T)], "E>T", position=k, features=(("bias", 0, "hg=E>T"),))
        for t, label in enumerate(labels):
            def f(kind):
                return (("word", k, f"hg={kind}#chain={label}"),)

            b.edge(("T", k, t), [("I", k, t)], "T>I", type_index=t, position=k, features=f("T>I"))
            b.edge(("T", k, t), [LEAF], "T>X", type_index=t, position=k, features=f("T>X"))
            if k + 1 < n:
                b.edge(("I", k, t), [("I", k + 1, t)], "I>I", type_index=t, position=k, features=f("I>I"))
            b.edge(("I", k, t), [LEAF], "I>X", type_index=t, position=k, features=f("I>X"))
            if k + 1 < n:
                b.edge(("I", k, t), [("I", k + 1, t), LEAF], "I>IX", type_index=t, position=k, features=f("I>IX"))
    return b.finish("hypergraph", sentence, labels)


PENALTY_PLACEMENTS = ("start", "token")


def _is_penalty(net: Network, e: Edge, placement: str = "start") -> bool:
    scheme = net.scheme
    if scheme == "hypergraph":
        return e.label == "T>I"
    child = net.nodes[e.children[0]]
    if scheme == "edge":
        # "token": every edge into an I node, so the feature counts in-mention
        # words; "start": only the edges whose separator opens a mention
        if placement == "token":
            return child[0] == "I"
        return child[0] == "I" and Separator[e.label].has_s
    if scheme == "state":
        return child[0] == "sep" and Separator[child[3]].has_s
    # lcrf: incoming edges of B and U states
    return child[0] == "tag" and child[3][0] in "BU"


def attach_penalty(network: Network, placement: str = "start") -> Network:
    """Mark the mention-starting edges that carry the reserved penalty feature.

    ``placement`` only matters for the edge scheme (see :func:`_is_penalty`).
    """
    if placement not in PENALTY_PLACEMENTS:
        raise ValueError(f"unknown penalty placement {placement!r}")
    edges = [replace(e, penalty=_is_penalty(network, e, placement)) for e in network.edges]
    return Network(network.scheme, network.sentence, network.labels, network.nodes, edges, network.root, network.leaf)


_BUILDERS = {
    "edge": _build_edge,
    "state": _build_state,
    "hypergraph": _build_hypergraph,
    "lcrf-single": lambda s, l: _build_lcrf(s, l, multi=False),
    "lcrf-multi": lambda s, l: _build_lcrf(s, l, multi=True),
}


def build(scheme: str, sentence: Sentence, labels: Sequence[str], penalty: bool | str = True) -> Network:
    """Compile ``sentence`` into the ``scheme`` network.

    ``penalty`` is False (no penalty edges), True (default placement) or a
    placement name from :data:`PENALTY_PLACEMENTS`.
    """
    if scheme not in _BUILDERS:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if len(sentence) == 0:
        raise ValueError("cannot build a network for an empty sentence")
    if not labels:
        raise ValueError("need at least one mention type")
    net = _BUILDERS[scheme](sentence, tuple(labels))
    if penalty is False:
        return net
    return attach_penalty(net, "start" if penalty is True else penalty)


# ---------------------------------------------------------------------------
# gold structures and interpretation


def _overlapping_pair(mentions: Sequence[Mention]):
    ms = sorted(mentions)
    for i, m in enumerate(ms):
        for other in ms[i + 1 :]:
            if other.start > m.end:
                break
            return m, other
    return None


def check_capacity(scheme: str, mentions: Sequence[Mention], labels: Sequence[str]) -> None:
    """Raise :class:`CapacityError` if the scheme cannot represent ``mentions``."""
    for m in mentions:
        if m.label not in labels:
            raise CapacityError(f"mention label {m.label!r} not in label set {tuple(labels)}")
    if scheme == "lcrf-single":
        pair = _overlapping_pair(mentions)
        if pair:
            raise CapacityError(f"lcrf-single cannot represent overlapping mentions {pair[0]} and {pair[1]}", pair)
    elif scheme == "lcrf-multi":
        for label in labels:
            pair = _overlapping_pair([m for m in mentions if m.label == label])
            if pair:
                raise CapacityError(
                    f"lcrf-multi cannot represent same-type overlapping mentions {pair[0]} and {pair[1]}", pair
                )


def reduce_to_capacity(scheme: str, mentions: Sequence[Mention]) -> list[Mention]:
    """Greedily keep the longest (then leftmost) mentions the scheme can hold."""
    if scheme not in ("lcrf-single", "lcrf-multi"):
        return list(mentions)
    kept: list[Mention] = []
    for m in sorted(mentions, key=lambda m: (m.start - m.end, m.start, m.label)):
        clash = any(m.overlaps(k) and (scheme == "lcrf-single" or k.label == m.label) for k in kept)
        if not clash:
            kept.append(m)
    return sorted(kept)


def gold_structure(network: Network, sentence: Sentence | None = None) -> Structure:
    sentence = sentence if sentence is not None else network.sentence
    if len(sentence) != network.n:
        raise ValueError("sentence does not match network")
    check_capacity(network.scheme, sentence.mentions, network.labels)
    scheme = network.scheme
    chosen: list[int] = []
    n = network.n
    if scheme in ("edge", "state"):
        for t, label in enumerate(network.labels):
            seq = codec.encode(n, sentence.spans(label))
            node = network.node_index[_chain_ends(t, len(network.labels))[0]]
            labels = (
                [s.name for s in seq]
                if scheme == "edge"
                else [f"^>{seq[0].name}"] + [f"{a.name}>{b.name}" for a, b in zip(seq, seq[1:])] + [f"{seq[-1].name}>$"]
            )
            for lab in labels:
                e = network.find_edge(node, lab, t)
                chosen.append(e)
                node = network.edges[e].children[0]
    elif scheme in ("lcrf-single", "lcrf-multi"):
        from .corpus import mentions_to_tags

        multi = scheme == "lcrf-multi"
        chains = [(t, [lab]) for t, lab in enumerate(network.labels)] if multi else [(0, list(network.labels))]
        for t, chain_labels in chains:
            ms = [m for m in sentence.mentions if m.label in chain_labels]
            tags = mentions_to_tags(n, ms, "bilou")
            if multi:
                tags = [tag[0] for tag in tags]
            node = network.node_index[_chain_ends(t, len(chains))[0]]
            for lab in [f"^>{tags[0]}"] + [f"{a}>{b}" for a, b in zip(tags, tags[1:])] + [f"{tags[-1]}>$"]:
                e = network.find_edge(node, lab)
                chosen.append(e)
                node = network.edges[e].children[0]
    elif scheme == "hypergraph":
        for v, role in enumerate(network.nodes):
            if role[0] in ("root", "A") or role[0] == "E":
                chosen.extend(network.out_edges[v])
        for t, label in enumerate(network.labels):
            seq = codec.encode(n, sentence.spans(label))
            for k in range(n):
                tnode = network.node_index[("T", k, t)]
                chosen.append(network.find_edge(tnode, "T>I" if seq[k].has_s else "T>X"))
                if seq[k].next_in:
                    nxt = seq[k + 1]
                    lab = "I>IX" if (nxt.has_e and nxt.has_c) else "I>I" if nxt.has_c else "I>X"
                    chosen.append(network.find_edge(network.node_index[("I", k, t)], lab))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return network.structure(chosen)


def separator_sequences(structure: Structure) -> dict[str, list[Separator]]:
    """Per-type separator sequences carried by a state/edge/hypergraph structure."""
    net = structure.network
    n = net.n
    scheme = net.scheme
    out = {}
    for t, label in enumerate(net.labels):
        if scheme == "edge":
            seq = [None] * (n + 1)
            for e in structure.edges:
                edge = net.edges[e]
                if edge.type_index == t:
                    seq[edge.position] = Separator[edge.label]
        elif scheme == "state":
            seq = [None] * (n + 1)
            for e in structure.edges:
                edge = net.edges[e]
                if edge.type_index == t and edge.position <= n:
                    seq[edge.position] = Separator[edge.label.split(">")[1]]
        elif scheme == "hypergraph":
            flags = [[False, False, False] for _ in range(n + 1)]  # E, C, S
            for e in structure.edges:
                edge = net.edges[e]
                if edge.type_index != t:
                    continue
                k = edge.position
                if edge.label == "T>I":
                    flags[k][2] = True
                elif edge.label in ("I>X", "I>IX"):
                    flags[k + 1][0] = True
                if edge.label in ("I>I", "I>IX"):
                    flags[k + 1][1] = True
            seq = [Separator.from_flags(*f) for f in flags]
        else:
            raise ValueError(f"{scheme} structures carry no separators")
        out[label] = seq
    return out


def read_structure(structure: Structure) -> set[Mention]:
    """Mentions encoded by a structure (nested reading for ambiguous ones)."""
    from .corpus import _tags_to_mentions

    net = structure.network
    if net.scheme in ("edge", "state", "hypergraph"):
        return {
            Mention(s, e, label)
            for label, seq in separator_sequences(structure).items()
            for s, e in codec.interpret(seq)
        }
    mentions = set()
    tags_by_chain: dict[int, list[str]] = defaultdict(lambda: [""] * net.n)
    for e in structure.edges:
        edge = net.edges[e]
        child = net.nodes[edge.children[0]]
        if child[0] == "tag":
            tags_by_chain[child[2]][child[1]] = child[3]
    for tags in tags_by_chain.values():
        mentions.update(_tags_to_mentions(tags, 0))
    return mentions
