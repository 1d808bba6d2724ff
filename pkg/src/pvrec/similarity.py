"""Binary-feedback similarity metrics and neighborhood graphs.

Feedback is strictly binary (a user either recorded an element or did
not), so every metric reduces to set-overlap arithmetic on interaction
counts.  Neighborhoods are found through an inverted index: only pairs
that share at least one element are ever compared.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, TextIO

import numpy as np

from . import kernels
from .core import Event


class Metric(enum.Enum):
    JACCARD = "jaccard"
    DICE = "dice"
    COSINE = "cosine"
    MATCHING = "matching"

    @classmethod
    def parse(cls, token: str) -> "Metric":
        for m in cls:
            if m.value == token:
                return m
        raise ValueError(f"unknown similarity metric {token!r}")


def similarity(metric: Metric, a: Iterable, b: Iterable) -> float:
    """Set-overlap similarity between two duplicate-free element sets.

    Disjoint or empty inputs score 0 under every metric.  Matching is the
    raw intersection size and therefore unbounded; the other three lie in
    [0, 1].
    """
    sa, sb = set(a), set(b)
    inter = len(sa & sb)
    if inter == 0:
        return 0.0
    if metric is Metric.JACCARD:
        return inter / (len(sa) + len(sb) - inter)
    if metric is Metric.DICE:
        return 2 * inter / (len(sa) + len(sb))
    if metric is Metric.COSINE:
        return inter / math.sqrt(len(sa) * len(sb))
    return float(inter)


def _metric_weights(metric: Metric, inter: np.ndarray, size_a: np.ndarray,
                    size_b: np.ndarray) -> np.ndarray:
    # same expressions as similarity(); int64 in, float64 out, bit-compatible
    if metric is Metric.JACCARD:
        return inter / (size_a + size_b - inter)
    if metric is Metric.DICE:
        return 2 * inter / (size_a + size_b)
    if metric is Metric.COSINE:
        return inter / np.sqrt(size_a * size_b)
    return inter.astype(np.float64)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary user-item feedback in CSR form over sorted id universes."""

    users: tuple[str, ...]
    items: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_pairs(cls, users: Iterable[str], items: Iterable[str],
                   pairs: Iterable[tuple[str, str]]) -> "InteractionMatrix":
        users = tuple(sorted(set(users)))
        items = tuple(sorted(set(items)))
        uix = {u: i for i, u in enumerate(users)}
        iix = {e: i for i, e in enumerate(items)}
        coords = sorted({(uix[u], iix[e]) for u, e in pairs})
        indptr = np.zeros(len(users) + 1, dtype=np.int64)
        indices = np.fromiter((e for _, e in coords), dtype=np.int64, count=len(coords))
        for u, _ in coords:
            indptr[u + 1] += 1
        np.cumsum(indptr, out=indptr)
        return cls(users, items, indptr, indices)

    @classmethod
    def from_events(cls, events: Iterable[Event], recordings_by_id: Mapping,
                    cut: int | None = None) -> "InteractionMatrix":
        """Feedback from member recordings, keeping only those created at or before `cut`.

        The user and item universes always cover the full input, so matrices
        for different cuts are index-compatible; only the stored interactions
        shrink.
        """
        pairs = []
        users = set()
        items = []
        for ev in events:
            items.append(ev.id)
            for rid in ev.member_recordings:
                rec = recordings_by_id[rid]
                users.add(rec.user)
                if cut is None or rec.created_at <= cut:
                    pairs.append((rec.user, ev.id))
        return cls.from_pairs(users, items, pairs)

    @classmethod
    def from_supporters(cls, events: Iterable[Event]) -> "InteractionMatrix":
        """Feedback straight from supporter lists (events CSV path, no timestamps)."""
        pairs = [(u, ev.id) for ev in events for u in ev.supporters]
        return cls.from_pairs((u for u, _ in pairs), (ev.id for ev in events), pairs)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @cached_property
    def user_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.users)}

    @cached_property
    def item_index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.items)}

    @cached_property
    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def transposed(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) of the item -> users view."""
        return kernels._transpose_csr(self.indptr, self.indices, self.n_users, self.n_items)

    def row(self, u: int) -> np.ndarray:
        """Item indices recorded by user index u."""
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def items_of(self, user: str) -> frozenset[str]:
        u = self.user_index.get(user)
        if u is None:
            return frozenset()
        return frozenset(self.items[j] for j in self.row(u))

    def nnz(self) -> int:
        return int(self.indices.shape[0])


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Per-node weighted neighbor lists, each sorted by weight desc then id asc."""

    kind: str  # "user" or "item"
    metric: Metric
    k_cap: int | None
    nodes: tuple[str, ...]
    indptr: np.ndarray
    ids: np.ndarray
    weights: np.ndarray

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def row_arrays(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.ids[lo:hi], self.weights[lo:hi]

    def neighbors(self, node: str) -> list[tuple[str, float]]:
        ids, w = self.row_arrays(self.node_index[node])
        return [(self.nodes[j], float(x)) for j, x in zip(ids, w)]


def _build_graph(kind: str, nodes: tuple[str, ...], indptr: np.ndarray, indices: np.ndarray,
                 n_cols: int, metric: Metric, k_cap: int | None) -> SimilarityGraph:
    n = len(nodes)
    sizes = np.diff(indptr)
    c_indptr, c_ids, c_cnt = kernels.cooc(indptr, indices, n, n_cols)
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(c_indptr))
    w_all = _metric_weights(metric, c_cnt, sizes[rows], sizes[c_ids])
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    id_parts, w_parts = [], []
    for i in range(n):
        lo, hi = c_indptr[i], c_indptr[i + 1]
        ids, w = c_ids[lo:hi], w_all[lo:hi]
        order = np.lexsort((ids, -w))
        if k_cap is not None:
            order = order[:k_cap]
        id_parts.append(ids[order])
        w_parts.append(w[order])
        out_indptr[i + 1] = out_indptr[i] + order.shape[0]
    ids = np.concatenate(id_parts) if id_parts else np.zeros(0, np.int64)
    weights = np.concatenate(w_parts) if w_parts else np.zeros(0, np.float64)
    return SimilarityGraph(kind, metric, k_cap, nodes, out_indptr, ids, weights)


def build_user_graph(m: InteractionMatrix, metric: Metric,
                     k_cap: int | None = None) -> SimilarityGraph:
    """User-to-user graph over users sharing at least one recorded element."""
    if k_cap is not None and k_cap < 1:
        raise ValueError("k_cap must be positive or None")
    return _build_graph("user", m.users, m.indptr, m.indices, m.n_items, metric, k_cap)


def build_item_graph(m: InteractionMatrix, metric: Metric,
                     k_cap: int | None = None) -> SimilarityGraph:
    """Item-to-item graph over elements sharing at least one recorder."""
    if k_cap is not None and k_cap < 1:
        raise ValueError("k_cap must be positive or None")
    t_indptr, t_indices = m.transposed
    return _build_graph("item", m.items, t_indptr, t_indices, m.n_users, metric, k_cap)


def _extended_row(g: SimilarityGraph, i: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Neighborhood of node index i, padded with second-level neighbors when short.

    First-level lists of length >= k are returned truncated, untouched.
    Otherwise neighbors-of-neighbors enter with the product of the two path
    coefficients (max over paths), and the merged list is re-sorted.
    """
    ids, w = g.row_arrays(i)
    if ids.shape[0] >= k:
        return ids[:k], w[:k]
    first = set(ids.tolist())
    best: dict[int, float] = {}
    for a, wa in zip(ids.tolist(), w.tolist()):
        b_ids, b_w = g.row_arrays(a)
        for b, wb in zip(b_ids.tolist(), b_w.tolist()):
            if b == i or b in first:
                continue
            prod = wa * wb
            if prod > best.get(b, 0.0):
                best[b] = prod
    if not best:
        return ids, w
    all_ids = np.concatenate([ids, np.fromiter(best.keys(), dtype=np.int64, count=len(best))])
    all_w = np.concatenate([w, np.fromiter(best.values(), dtype=np.float64, count=len(best))])
    order = np.lexsort((all_ids, -all_w))[:k]
    return all_ids[order], all_w[order]


def extend_second_level(g: SimilarityGraph, node: str, k: int) -> list[tuple[str, float]]:
    """Top-k neighborhood of `node`, reaching through second-level neighbors if needed."""
    if g.kind != "user":
        raise ValueError("second-level extension applies to user graphs only")
    if k < 1:
        raise ValueError("k must be >= 1")
    ids, w = _extended_row(g, g.node_index[node], k)
    return [(g.nodes[j], float(x)) for j, x in zip(ids, w)]


def write_graph_csv(stream: TextIO, g: SimilarityGraph, comment: str | None = None) -> None:
    """Dump stored (first-level) arcs as node,neighbor,weight,level rows."""
    if comment is not None:
        stream.write(f"# {comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["node", "neighbor", "weight", "level"])
    for i, node in enumerate(g.nodes):
        ids, w = g.row_arrays(i)
        for j, x in zip(ids, w):
            writer.writerow([node, g.nodes[j], repr(float(x)), 1])
