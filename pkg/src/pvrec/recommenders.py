"""Top-n scorers over binary implicit feedback.

All scorers take the training interaction matrix plus a candidate id list
and return one ScoredList per user, sorted by weight descending with ties
broken by ascending event id.  A user's own training history is always
excluded from her list.  Score accumulation runs in the stored neighbor
order, so results are bit-reproducible and match a sequential brute-force
evaluation of the same sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .similarity import InteractionMatrix, SimilarityGraph, _extended_row


@dataclass(frozen=True)
class ScoredList:
    user: str
    entries: tuple[tuple[str, float], ...]

    def top(self, n: int) -> list[str]:
        return [eid for eid, _ in self.entries[:n]]


def recommend_topn(scored: ScoredList, n: int) -> list[str]:
    """First min(n, len) event ids of a scored list."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return scored.top(n)


def _candidate_indices(m: InteractionMatrix, candidates: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Candidate ids known to the matrix, sorted, with their item indices."""
    known = sorted(c for c in candidates if c in m.item_index)
    idx = np.fromiter((m.item_index[c] for c in known), dtype=np.int64, count=len(known))
    return known, idx


def _assemble(m: InteractionMatrix, cand_ids: Sequence[str], cand_idx: np.ndarray,
              scores: np.ndarray, keep_zeros: bool = False) -> dict[str, ScoredList]:
    """Dense per-user candidate scores -> exclusion-filtered, sorted ScoredLists."""
    out: dict[str, ScoredList] = {}
    for u, user in enumerate(m.users):
        history = set(m.row(u).tolist())
        row = scores[u]
        entries = [
            (cand_ids[j], float(row[j]))
            for j in range(len(cand_ids))
            if int(cand_idx[j]) not in history and (keep_zeros or row[j] > 0.0)
        ]
        entries.sort(key=lambda e: (-e[1], e[0]))
        out[user] = ScoredList(user, tuple(entries))
    return out


def most_popular(m: InteractionMatrix, candidates: Sequence[str]) -> dict[str, ScoredList]:
    """Weight = number of training users who recorded the candidate.

    The ranking is identical for every user; only the exclusion of each
    user's own history differs.
    """
    cand_ids, cand_idx = _candidate_indices(m, candidates)
    counts = np.bincount(m.indices, minlength=m.n_items).astype(np.float64)
    scores = np.broadcast_to(counts[cand_idx], (m.n_users, len(cand_ids)))
    return _assemble(m, cand_ids, cand_idx, scores)


def _pack_neighborhoods(g: SimilarityGraph, k: int, second_level: bool):
    """Per-user effective neighborhoods as CSR arrays, extended when short."""
    n = len(g.nodes)
    id_parts, w_parts = [], []
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if second_level:
            ids, w = _extended_row(g, i, k)
        else:
            ids, w = g.row_arrays(i)
            ids, w = ids[:k], w[:k]
        id_parts.append(ids)
        w_parts.append(w)
        indptr[i + 1] = indptr[i] + ids.shape[0]
    ids = np.concatenate(id_parts) if id_parts else np.zeros(0, np.int64)
    w = np.concatenate(w_parts) if w_parts else np.zeros(0, np.float64)
    return indptr, ids, w


def user_knn(m: InteractionMatrix, graph: SimilarityGraph, k: int,
             candidates: Sequence[str], second_level: bool = False) -> dict[str, ScoredList]:
    """Weight = sum of neighbor coefficients over neighbors who recorded the candidate."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if graph.kind != "user":
        raise ValueError("user_knn needs a user graph")
    if graph.nodes != m.users:
        raise ValueError("graph was not built over this matrix's users")
    if graph.k_cap is not None and graph.k_cap < k:
        raise ValueError(f"graph k_cap={graph.k_cap} cannot serve k={k}; rebuild the graph")
    indptr, ids, w = _pack_neighborhoods(graph, k, second_level)
    cand_ids, cand_idx = _candidate_indices(m, candidates)
    scores = kernels.user_scores(indptr, ids, w, m.indptr, m.indices, m.n_items)
    return _assemble(m, cand_ids, cand_idx, scores[:, cand_idx])


def item_knn(m: InteractionMatrix, graph: SimilarityGraph, n_items: int,
             candidates: Sequence[str]) -> dict[str, ScoredList]:
    """Weight = sum of similarities of the candidate's n_items most similar
    neighbors restricted to the user's recorded items."""
    if n_items < 1:
        raise ValueError("n_items must be >= 1")
    if graph.kind != "item":
        raise ValueError("item_knn needs an item graph")
    if graph.nodes != m.items:
        raise ValueError("graph was not built over this matrix's items")
    cand_ids, cand_idx = _candidate_indices(m, candidates)
    scores = kernels.item_scores(m.indptr, m.indices, graph.indptr, graph.ids,
                                 graph.weights, cand_idx, n_items, m.n_items)
    return _assemble(m, cand_ids, cand_idx, scores)


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Latent factors from alternating least squares on implicit feedback."""

    f: int
    X: np.ndarray  # user factors, |U| x f
    Y: np.ndarray  # item factors, |E| x f
    lam: float
    alpha: float
    steps: int
    seed: int
    users: tuple[str, ...]
    items: tuple[str, ...]
    objective_history: tuple[float, ...] = field(default=())

    def score(self, user: str, item: str) -> float:
        u = self.users.index(user)
        i = self.items.index(item)
        return float(self.X[u] @ self.Y[i])


def _dense_preferences(m: InteractionMatrix) -> np.ndarray:
    r = np.zeros((m.n_users, m.n_items))
    for u in range(m.n_users):
        r[u, m.row(u)] = 1.0
    return r


def als_objective(X: np.ndarray, Y: np.ndarray, m: InteractionMatrix,
                  lam: float, alpha: float) -> float:
    """Confidence-weighted regularized squared error over all user-item cells.

    sum_ui (1 + alpha r_ui)(r_ui - x_u . y_i)^2 + lam (|X|^2 + |Y|^2);
    alpha = 0 gives the plain unweighted form.
    """
    r = _dense_preferences(m)
    err = r - X @ Y.T
    conf = 1.0 + alpha * r
    return float((conf * err * err).sum() + lam * ((X * X).sum() + (Y * Y).sum()))


def als_gradient(X: np.ndarray, Y: np.ndarray, m: InteractionMatrix,
                 lam: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of als_objective with respect to X and Y."""
    r = _dense_preferences(m)
    err = r - X @ Y.T
    conf = 1.0 + alpha * r
    ce = conf * err
    gx = -2.0 * ce @ Y + 2.0 * lam * X
    gy = -2.0 * ce.T @ X + 2.0 * lam * Y
    return gx, gy


def als_train(m: InteractionMatrix, f: int = 100, lam: float = 500.0, alpha: float = 40.0,
              steps: int = 15, seed: int = 0) -> FactorModel:
    """Alternating exact least squares on implicit binary preferences.

    Preferences are 1 on recorded cells and 0 elsewhere; confidences are
    1 + alpha on recorded cells and 1 elsewhere.  One step solves every
    user row holding the item factors, then every item row holding the
    user factors, each by its exact f x f normal equations.  The objective
    value is recorded after every step and never increases.
    """
    if f < 1:
        raise ValueError("f must be >= 1")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 0.01, (m.n_users, f))
    y = rng.uniform(0.0, 0.01, (m.n_items, f))
    t_indptr, t_indices = m.transposed
    history = []
    for _ in range(steps):
        x = kernels.als_half_sweep(m.indptr, m.indices, y, lam, alpha)
        y = kernels.als_half_sweep(t_indptr, t_indices, x, lam, alpha)
        obj = als_objective(x, y, m, lam, alpha)
        if not np.isfinite(obj):
            raise FloatingPointError(
                "ALS objective is not finite; check lambda/alpha against the data scale")
        history.append(obj)
    return FactorModel(f, x, y, lam, alpha, steps, seed, m.users, m.items, tuple(history))


def als_score(model: FactorModel, m: InteractionMatrix,
              candidates: Sequence[str]) -> dict[str, ScoredList]:
    """Weight = inner product of stored factor rows; unseen candidates score 0.

    Users absent from the training matrix get an empty list.
    """
    item_pos = {e: i for i, e in enumerate(model.items)}
    cand_ids, cand_idx = _candidate_indices(m, candidates)
    cols = np.zeros((len(cand_ids), model.f))
    warm = []
    for j, c in enumerate(cand_ids):
        p = item_pos.get(c)
        if p is not None:
            cols[j] = model.Y[p]
            warm.append(j)
    out: dict[str, ScoredList] = {}
    user_pos = {u: i for i, u in enumerate(model.users)}
    for u, user in enumerate(m.users):
        p = user_pos.get(user)
        if p is None:
            out[user] = ScoredList(user, ())
            continue
        history = set(m.row(u).tolist())
        row = cols @ model.X[p]
        entries = [
            (cand_ids[j], float(row[j]))
            for j in range(len(cand_ids))
            if int(cand_idx[j]) not in history
        ]
        entries.sort(key=lambda e: (-e[1], e[0]))
        out[user] = ScoredList(user, tuple(entries))
    return out


def random_rec(m: InteractionMatrix, candidates: Sequence[str], seed: int) -> dict[str, ScoredList]:
    """Seeded uniform shuffle of the candidates, independently per user."""
    cand_ids, cand_idx = _candidate_indices(m, candidates)
    out: dict[str, ScoredList] = {}
    for u, user in enumerate(m.users):
        history = set(m.row(u).tolist())
        kept = [cand_ids[j] for j in range(len(cand_ids)) if int(cand_idx[j]) not in history]
        rng = np.random.default_rng([seed, u])
        weights = rng.random(len(kept))
        entries = sorted(zip(kept, weights.tolist()), key=lambda e: (-e[1], e[0]))
        out[user] = ScoredList(user, tuple(entries))
    return out


def oracle_rec(m: InteractionMatrix, candidates: Sequence[str],
               truth: Mapping[str, Iterable[str]]) -> dict[str, ScoredList]:
    """Upper bound: weight 1 on the user's held-out events, 0 elsewhere."""
    cand_ids, cand_idx = _candidate_indices(m, candidates)
    out: dict[str, ScoredList] = {}
    for u, user in enumerate(m.users):
        history = set(m.row(u).tolist())
        hits = set(truth.get(user, ()))
        entries = [
            (cand_ids[j], 1.0 if cand_ids[j] in hits else 0.0)
            for j in range(len(cand_ids))
            if int(cand_idx[j]) not in history
        ]
        entries.sort(key=lambda e: (-e[1], e[0]))
        out[user] = ScoredList(user, tuple(entries))
    return out
