"""Exact inference on (hyper)graph networks, plus enumeration oracles.

The dynamic programs work on a :class:`Lattice`, an array form of one or
more networks.  Nodes are grouped by *height* (longest distance to a sink);
every edge whose parent has height ``h`` only reads values of lower
heights, so each height is one vectorized step.  Stacking a whole corpus
into a single lattice turns a training pass into a few dozen numpy calls.

Hyperedges multiply the inside scores of all their children.  On the
mention hypergraph that counts some non-hyperpath combinations, so the
inside value there is the over-counted normalizer, not the sum over
hyperpaths.  :func:`brute_force_logZ` computes the latter by enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EnumerationLimitError
from .networks import Network, Structure

ENUMERATION_LIMIT = 10**6


class _Level:
    __slots__ = ("eids", "children", "starts", "seg", "parents", "edge_parent")

    def __init__(self, eids, children, starts, seg, parents, edge_parent):
        self.eids = eids
        self.children = children
        self.starts = starts
        self.seg = seg
        self.parents = parents
        self.edge_parent = edge_parent


class Lattice:
    """Array form of a disjoint union of networks.

    Node ``num_nodes`` is an extra slot holding the multiplicative unit
    (log value 0); it pads hyperedges with fewer children than the widest.
    """

    def __init__(self, networks: Sequence[Network]):
        self.networks = list(networks)
        node_off = np.cumsum([0] + [len(n.nodes) for n in self.networks])
        edge_off = np.cumsum([0] + [len(n.edges) for n in self.networks])
        self.node_offsets, self.edge_offsets = node_off, edge_off
        self.num_nodes = int(node_off[-1])
        self.num_edges = int(edge_off[-1])
        width = max([1] + [len(e.children) for n in self.networks for e in n.edges])
        unit = self.num_nodes
        parent = np.empty(self.num_edges, dtype=np.int64)
        children = np.full((self.num_edges, width), unit, dtype=np.int64)
        edge_net = np.empty(self.num_edges, dtype=np.int64)
        for i, net in enumerate(self.networks):
            base, eb = node_off[i], edge_off[i]
            for j, e in enumerate(net.edges):
                parent[eb + j] = base + e.parent
                children[eb + j, : len(e.children)] = [base + c for c in e.children]
            edge_net[eb : edge_off[i + 1]] = i
        self.parent, self.children, self.edge_net = parent, children, edge_net
        self.roots = np.array([node_off[i] + n.root for i, n in enumerate(self.networks)], dtype=np.int64)
        heights = np.concatenate([n.heights for n in self.networks]) if self.networks else np.zeros(0, np.int64)
        hp = heights[parent]
        order = np.lexsort((np.arange(self.num_edges), parent, hp))
        self.levels = []
        if self.num_edges:
            bounds = np.flatnonzero(np.diff(hp[order])) + 1
            for chunk in np.split(order, bounds):
                par = parent[chunk]
                starts = np.concatenate([[0], np.flatnonzero(np.diff(par)) + 1])
                seg = np.cumsum(np.r_[0, (np.diff(par) != 0).astype(np.int64)])
                self.levels.append(_Level(chunk, children[chunk], starts, seg, par[starts], par))

    def local_edges(self, i: int, global_edges) -> list[int]:
        off = self.edge_offsets[i]
        return [int(e - off) for e in global_edges]


def lattice(net) -> Lattice:
    if isinstance(net, Lattice):
        return net
    cached = getattr(net, "_lattice", None)
    if cached is None:
        cached = Lattice([net])
        net._lattice = cached
    return cached


@dataclass
class InsideOutsideTables:
    inside: np.ndarray
    outside: np.ndarray | None
    log_z: np.ndarray

    @property
    def logZ(self) -> float:
        """Log-partition of the first (usually only) network."""
        return float(self.log_z[0])


@dataclass
class DecodeResult:
    structure: Structure
    score: float


def _seg_logsumexp(s, level):
    m = np.maximum.reduceat(s, level.starts)
    return m + np.log(np.add.reduceat(np.exp(s - m[level.seg]), level.starts))


def inside(net, theta) -> InsideOutsideTables:
    """Inside log-scores of every node and the log-partition of every network."""
    lat = lattice(net)
    theta = np.asarray(theta, dtype=float)
    ins = np.zeros(lat.num_nodes + 1)
    for lv in lat.levels:
        s = theta[lv.eids] + ins[lv.children].sum(axis=1)
        ins[lv.parents] = _seg_logsumexp(s, lv)
    return InsideOutsideTables(ins, None, ins[lat.roots].copy())


def outside_and_marginals(net, theta, tables: InsideOutsideTables | None = None):
    """Edge marginals ``p(e) = exp(outside(parent) + theta(e) + sum inside(children) - logZ)``.

    Returns ``(marginals, tables)`` with the outside half filled in.  On
    hypergraphs a marginal is the expected number of uses of the edge.
    """
    lat = lattice(net)
    theta = np.asarray(theta, dtype=float)
    if tables is None:
        tables = inside(lat, theta)
    ins = tables.inside
    out = np.full(lat.num_nodes + 1, -np.inf)
    out[lat.roots] = 0.0
    for lv in reversed(lat.levels):
        base = out[lv.edge_parent] + theta[lv.eids] + ins[lv.children].sum(axis=1)
        for j in range(lv.children.shape[1]):
            col = lv.children[:, j]
            np.logaddexp.at(out, col, base - ins[col])
    out[lat.num_nodes] = -np.inf
    tables.outside = out
    log_marg = out[lat.parent] + theta + ins[lat.children].sum(axis=1) - tables.log_z[lat.edge_net]
    return np.exp(log_marg), tables


def expected_features(net, theta, marginals, features) -> np.ndarray:
    """``sum_e p(e) f(e)`` for a (num_edges x dim) feature matrix."""
    return np.asarray(features.T @ marginals).ravel()


def _argmax_table(lat: Lattice, theta):
    best = np.zeros(lat.num_nodes + 1)
    arg = np.full(lat.num_nodes, -1, dtype=np.int64)
    for lv in lat.levels:
        s = theta[lv.eids] + best[lv.children].sum(axis=1)
        m = np.maximum.reduceat(s, lv.starts)
        idx = np.arange(len(s))
        first = np.minimum.reduceat(np.where(s == m[lv.seg], idx, len(s)), lv.starts)
        best[lv.parents] = m
        arg[lv.parents] = lv.eids[first]
    return best, arg


def _backtrack(lat: Lattice, arg, i: int) -> list[int]:
    chosen = []
    seen = set()
    stack = [int(lat.roots[i])]
    while stack:
        v = stack.pop()
        if v in seen or arg[v] < 0:
            continue
        seen.add(v)
        e = int(arg[v])
        chosen.append(e)
        stack.extend(int(c) for c in lat.children[e] if c != lat.num_nodes)
    return lat.local_edges(i, chosen)


def decode(net, theta) -> DecodeResult | list[DecodeResult]:
    """Max-product decoding; ties go to the earliest-declared edge.

    Given a single network returns one result, given a multi-network
    lattice a list.
    """
    lat = lattice(net)
    theta = np.asarray(theta, dtype=float)
    best, arg = _argmax_table(lat, theta)
    results = [
        DecodeResult(n.structure(_backtrack(lat, arg, i)), float(best[lat.roots[i]]))
        for i, n in enumerate(lat.networks)
    ]
    return results[0] if isinstance(net, Network) else results


# ---------------------------------------------------------------------------
# enumeration oracles


def enumerate_structures(network: Network, limit: int = ENUMERATION_LIMIT):
    """All structures as ``(edge tuple, edge multiplicity array)``.

    Each reached node picks one outgoing edge, shared nodes pick once.
    Order is lexicographic in the edge choices taken in node order.
    """
    n_nodes = len(network.nodes)
    node_mult = np.zeros(n_nodes, dtype=np.int64)
    node_mult[network.root] = 1
    chosen: list[int] = []
    out = []

    def rec(v):
        while v < n_nodes and (node_mult[v] == 0 or v == network.leaf):
            v += 1
        if v == n_nodes:
            if len(out) >= limit:
                raise EnumerationLimitError(f"more than {limit} structures")
            out.append(tuple(chosen))
            return
        for e in network.out_edges[v]:
            kids = network.edges[e].children
            for c in kids:
                node_mult[c] += node_mult[v]
            chosen.append(e)
            rec(v + 1)
            chosen.pop()
            for c in kids:
                node_mult[c] -= node_mult[v]

    rec(0)
    return [(s, network.multiplicities(s)) for s in out]


class StructureTable:
    """Every structure of a network as rows of an edge-multiplicity matrix."""

    def __init__(self, network: Network, limit: int = ENUMERATION_LIMIT):
        self.network = network
        items = enumerate_structures(network, limit)
        self.structures = [s for s, _ in items]
        self.matrix = np.array([m for _, m in items], dtype=float).reshape(len(items), len(network.edges))

    def __len__(self):
        return len(self.structures)

    def scores(self, theta) -> np.ndarray:
        return self.matrix @ np.asarray(theta, dtype=float)

    def log_z(self, theta) -> float:
        s = self.scores(theta)
        m = s.max()
        return float(m + np.log(np.exp(s - m).sum()))

    def best(self, theta, tol: float = 1e-9) -> DecodeResult:
        s = self.scores(theta)
        i = int(np.flatnonzero(s >= s.max() - tol)[0])
        return DecodeResult(self.network.structure(self.structures[i]), float(s[i]))


def brute_force_logZ(network: Network, theta, limit: int = ENUMERATION_LIMIT) -> float:
    """Log of the sum over structures (hyperpaths) of exp(score)."""
    return StructureTable(network, limit).log_z(theta)


def brute_force_best(network: Network, theta, limit: int = ENUMERATION_LIMIT) -> DecodeResult:
    return StructureTable(network, limit).best(theta)
