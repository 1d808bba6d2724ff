"""Hot numeric kernels: numba-compiled paths with pure-numpy fallbacks.

Every kernel exists twice: a ``*_np`` reference version written in plain
numpy, and (when numba is importable) a compiled version.  The module-level
dispatchers pick the compiled path unless the environment variable
``PVREC_NUMBA`` is set to ``0``/``false``/``off``.  Both paths are
deterministic; score accumulations run in the same order so the two paths
agree to the last bit wherever the docstring says so.

Scale note: the numpy fallbacks materialize dense intermediates
(n_users x n_users co-occurrence, n_users x n_items scores) and are meant
for the spec's desk scale, not for service deployments.
"""

from __future__ import annotations

import os

import numpy as np


def _flag_enabled() -> bool:
    raw = os.environ.get("PVREC_NUMBA", "").strip().lower()
    if raw in {"0", "false", "off", "no"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _flag_enabled()


# ---------------------------------------------------------------------------
# single-linkage clustering of timings under a two-sided threshold


def linkage_labels_np(starts: np.ndarray, ends: np.ndarray, period: int,
                      delta_b: int, delta_f: int) -> np.ndarray:
    """Connected components of the pairwise predicate d_start < delta_b AND d_end < delta_f.

    ``period`` is the cyclic frame length, or 0 for the absolute frame.
    Returns int64 labels numbered by first occurrence.
    """
    n = starts.shape[0]
    ds = np.abs(starts[:, None] - starts[None, :])
    de = np.abs(ends[:, None] - ends[None, :])
    if period > 0:
        ds = np.minimum(ds, period - ds)
        de = np.minimum(de, period - de)
    adj = (ds < delta_b) & (de < delta_f)
    labels = np.full(n, -1, dtype=np.int64)
    current = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = current
        while stack:
            j = stack.pop()
            for k in np.nonzero(adj[j])[0]:
                if labels[k] < 0:
                    labels[k] = current
                    stack.append(k)
        current += 1
    return labels


# ---------------------------------------------------------------------------
# co-occurrence counting over a binary CSR matrix (inverted-index join)


def cooc_np(indptr: np.ndarray, indices: np.ndarray, n_rows: int, n_cols: int):
    """Row-by-row co-occurrence counts: how many columns each pair of rows shares.

    Returns CSR triple (out_indptr, out_ids, out_counts) with the diagonal
    removed and ids ascending within each row.  Dense n_rows x n_rows
    intermediate; fine at desk scale.
    """
    dense = np.zeros((n_rows, n_cols))
    for i in range(n_rows):
        dense[i, indices[indptr[i]:indptr[i + 1]]] = 1.0
    counts = dense @ dense.T
    np.fill_diagonal(counts, 0.0)
    out_indptr = np.zeros(n_rows + 1, dtype=np.int64)
    ids_parts = []
    cnt_parts = []
    for i in range(n_rows):
        nz = np.nonzero(counts[i])[0]
        ids_parts.append(nz.astype(np.int64))
        cnt_parts.append(counts[i, nz].astype(np.int64))
        out_indptr[i + 1] = out_indptr[i] + nz.shape[0]
    out_ids = np.concatenate(ids_parts) if ids_parts else np.zeros(0, np.int64)
    out_cnt = np.concatenate(cnt_parts) if cnt_parts else np.zeros(0, np.int64)
    return out_indptr, out_ids, out_cnt


# ---------------------------------------------------------------------------
# one half of an ALS sweep: exact per-row normal-equation solves


def als_half_sweep_np(indptr: np.ndarray, indices: np.ndarray, other: np.ndarray,
                      lam: float, alpha: float) -> np.ndarray:
    """Solve every row's regularized least-squares subproblem holding `other` fixed.

    Row i minimizes sum_j c_ij (p_ij - x.y_j)^2 + lam |x|^2 with
    c = 1 + alpha on the row's observed columns and 1 elsewhere, p = 1 on
    observed columns and 0 elsewhere.
    """
    n_rows = indptr.shape[0] - 1
    f = other.shape[1]
    gram = other.T @ other + lam * np.eye(f)
    out = np.empty((n_rows, f))
    for i in range(n_rows):
        cols = indices[indptr[i]:indptr[i + 1]]
        m = other[cols]
        a = gram + alpha * (m.T @ m)
        b = (1.0 + alpha) * m.sum(axis=0) if cols.size else np.zeros(f)
        out[i] = np.linalg.solve(a, b)
    return out


# ---------------------------------------------------------------------------
# user-kNN score accumulation


def user_scores_np(neigh_indptr: np.ndarray, neigh_ids: np.ndarray, neigh_w: np.ndarray,
                   csr_indptr: np.ndarray, csr_indices: np.ndarray, n_items: int) -> np.ndarray:
    """Accumulate neighbor coefficients onto every item each neighbor recorded.

    Neighbors are visited in stored list order, so per-item sums are
    bit-identical between this path and the compiled one.
    """
    n_users = neigh_indptr.shape[0] - 1
    out = np.zeros((n_users, n_items))
    for u in range(n_users):
        row = out[u]
        for k in range(neigh_indptr[u], neigh_indptr[u + 1]):
            a = neigh_ids[k]
            row[csr_indices[csr_indptr[a]:csr_indptr[a + 1]]] += neigh_w[k]
    return out


# ---------------------------------------------------------------------------
# item-kNN scoring: per candidate, top-capped neighbors inside the user's history


def item_scores_np(csr_indptr: np.ndarray, csr_indices: np.ndarray,
                   g_indptr: np.ndarray, g_ids: np.ndarray, g_w: np.ndarray,
                   cand: np.ndarray, cap: int, n_items: int) -> np.ndarray:
    """Score candidates as the sum of their `cap` most similar neighbors the user recorded.

    Graph neighbor lists must already be ordered by weight descending, id
    ascending; the sum runs in that order (sequential, via cumsum) so both
    paths agree bitwise.
    """
    n_users = csr_indptr.shape[0] - 1
    out = np.zeros((n_users, cand.shape[0]))
    mark = np.zeros(n_items, dtype=bool)
    for u in range(n_users):
        hist = csr_indices[csr_indptr[u]:csr_indptr[u + 1]]
        mark[hist] = True
        for c, e in enumerate(cand):
            ids = g_ids[g_indptr[e]:g_indptr[e + 1]]
            sel = mark[ids]
            if sel.any():
                w = g_w[g_indptr[e]:g_indptr[e + 1]][sel][:cap]
                out[u, c] = np.cumsum(w)[-1]
        mark[hist] = False
    return out


# ---------------------------------------------------------------------------
# compiled variants

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _linkage_labels_nb(starts, ends, period, delta_b, delta_f):
        n = starts.shape[0]
        parent = np.arange(n)

        def find(parent, i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                ds = abs(starts[i] - starts[j])
                de = abs(ends[i] - ends[j])
                if period > 0:
                    if period - ds < ds:
                        ds = period - ds
                    if period - de < de:
                        de = period - de
                if ds < delta_b and de < delta_f:
                    ri = find(parent, i)
                    rj = find(parent, j)
                    if ri != rj:
                        parent[rj] = ri
        labels = np.full(n, -1, dtype=np.int64)
        current = 0
        for i in range(n):
            r = find(parent, i)
            if labels[r] < 0:
                labels[r] = current
                current += 1
            labels[i] = labels[r]
        return labels

    def linkage_labels_nb(starts, ends, period, delta_b, delta_f):
        return _linkage_labels_nb(starts.astype(np.int64), ends.astype(np.int64),
                                  np.int64(period), np.int64(delta_b), np.int64(delta_f))

    @njit(cache=True)
    def _cooc_nb(indptr, indices, t_indptr, t_indices, n_rows):
        scratch = np.zeros(n_rows, dtype=np.int64)
        out_indptr = np.zeros(n_rows + 1, dtype=np.int64)
        # first pass: sizes
        for i in range(n_rows):
            touched = 0
            for k in range(indptr[i], indptr[i + 1]):
                col = indices[k]
                for k2 in range(t_indptr[col], t_indptr[col + 1]):
                    j = t_indices[k2]
                    if j != i and scratch[j] == 0:
                        touched += 1
                        scratch[j] = 1
            out_indptr[i + 1] = out_indptr[i] + touched
            for k in range(indptr[i], indptr[i + 1]):
                col = indices[k]
                for k2 in range(t_indptr[col], t_indptr[col + 1]):
                    scratch[t_indices[k2]] = 0
        total = out_indptr[n_rows]
        out_ids = np.empty(total, dtype=np.int64)
        out_cnt = np.empty(total, dtype=np.int64)
        # second pass: counts, ids ascending
        for i in range(n_rows):
            for k in range(indptr[i], indptr[i + 1]):
                col = indices[k]
                for k2 in range(t_indptr[col], t_indptr[col + 1]):
                    j = t_indices[k2]
                    if j != i:
                        scratch[j] += 1
            pos = out_indptr[i]
            for j in range(n_rows):
                if scratch[j] > 0:
                    out_ids[pos] = j
                    out_cnt[pos] = scratch[j]
                    scratch[j] = 0
                    pos += 1
        return out_indptr, out_ids, out_cnt

    def cooc_nb(indptr, indices, n_rows, n_cols):
        t_indptr, t_indices = _transpose_csr(indptr, indices, n_rows, n_cols)
        return _cooc_nb(indptr, indices, t_indptr, t_indices, n_rows)

    @njit(cache=True)
    def _als_half_sweep_nb(indptr, indices, other, gram, lam, alpha):
        n_rows = indptr.shape[0] - 1
        f = other.shape[1]
        out = np.empty((n_rows, f))
        for i in range(n_rows):
            lo, hi = indptr[i], indptr[i + 1]
            a = gram.copy()
            b = np.zeros(f)
            if hi > lo:
                m = other[indices[lo:hi]]
                mt = m.T.copy()
                a += alpha * (mt @ m)
                for k in range(hi - lo):
                    for c in range(f):
                        b[c] += m[k, c]
                b *= 1.0 + alpha
            out[i] = np.linalg.solve(a, b)
        return out

    def als_half_sweep_nb(indptr, indices, other, lam, alpha):
        f = other.shape[1]
        gram = other.T @ other + lam * np.eye(f)
        return _als_half_sweep_nb(indptr, indices, other, gram, float(lam), float(alpha))

    @njit(cache=True)
    def user_scores_nb(neigh_indptr, neigh_ids, neigh_w, csr_indptr, csr_indices, n_items):
        n_users = neigh_indptr.shape[0] - 1
        out = np.zeros((n_users, n_items))
        for u in range(n_users):
            for k in range(neigh_indptr[u], neigh_indptr[u + 1]):
                a = neigh_ids[k]
                w = neigh_w[k]
                for j in range(csr_indptr[a], csr_indptr[a + 1]):
                    out[u, csr_indices[j]] += w
        return out

    @njit(cache=True)
    def item_scores_nb(csr_indptr, csr_indices, g_indptr, g_ids, g_w, cand, cap, n_items):
        n_users = csr_indptr.shape[0] - 1
        out = np.zeros((n_users, cand.shape[0]))
        mark = np.zeros(n_items, dtype=np.bool_)
        for u in range(n_users):
            for j in range(csr_indptr[u], csr_indptr[u + 1]):
                mark[csr_indices[j]] = True
            for c in range(cand.shape[0]):
                e = cand[c]
                total = 0.0
                taken = 0
                for k in range(g_indptr[e], g_indptr[e + 1]):
                    if taken >= cap:
                        break
                    if mark[g_ids[k]]:
                        total += g_w[k]
                        taken += 1
                out[u, c] = total
            for j in range(csr_indptr[u], csr_indptr[u + 1]):
                mark[csr_indices[j]] = False
        return out


# ---------------------------------------------------------------------------
# shared helpers and dispatchers


def _transpose_csr(indptr: np.ndarray, indices: np.ndarray, n_rows: int, n_cols: int):
    """CSR -> CSC index arrays via a stable counting sort."""
    rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(indptr))
    order = np.argsort(indices, kind="stable")
    t_indices = rows[order]
    t_indptr = np.zeros(n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(indices, minlength=n_cols), out=t_indptr[1:])
    return t_indptr, t_indices


def linkage_labels(starts, ends, period, delta_b, delta_f):
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    if starts.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if USE_NUMBA:
        return linkage_labels_nb(starts, ends, period, delta_b, delta_f)
    return linkage_labels_np(starts, ends, period, delta_b, delta_f)


def cooc(indptr, indices, n_rows, n_cols):
    if USE_NUMBA:
        return cooc_nb(indptr, indices, n_rows, n_cols)
    return cooc_np(indptr, indices, n_rows, n_cols)


def als_half_sweep(indptr, indices, other, lam, alpha):
    if USE_NUMBA:
        return als_half_sweep_nb(indptr, indices, other, lam, alpha)
    return als_half_sweep_np(indptr, indices, other, lam, alpha)


def user_scores(neigh_indptr, neigh_ids, neigh_w, csr_indptr, csr_indices, n_items):
    if USE_NUMBA:
        return user_scores_nb(neigh_indptr, neigh_ids, neigh_w, csr_indptr, csr_indices, n_items)
    return user_scores_np(neigh_indptr, neigh_ids, neigh_w, csr_indptr, csr_indices, n_items)


def item_scores(csr_indptr, csr_indices, g_indptr, g_ids, g_w, cand, cap, n_items):
    cand = np.asarray(cand, dtype=np.int64)
    if USE_NUMBA:
        return item_scores_nb(csr_indptr, csr_indices, g_indptr, g_ids, g_w,
                              cand, np.int64(cap), n_items)
    return item_scores_np(csr_indptr, csr_indices, g_indptr, g_ids, g_w, cand, cap, n_items)
