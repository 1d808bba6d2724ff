"""Time-sliced evaluation: candidate sets, per-user precision/recall, averaging.

For a cut time t, an event is recommendable if it still has an occurrence
after t (one-shots must start later; periodic events always recur).  A
user's history R(u,t) holds the events she recorded at or before t, her
truth V(u,t) the recommendable events all of whose recordings by her came
after t.  Trained models see pre-t interactions only; users with empty
truth are left out of the averages.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

from .core import Event, Recording, next_occurrence
from .recommenders import (
    als_score,
    als_train,
    item_knn,
    most_popular,
    oracle_rec,
    random_rec,
    recommend_topn,
    user_knn,
)
from .similarity import InteractionMatrix, Metric, build_item_graph, build_user_graph

ALGORITHMS = ("mostpopular", "user-knn", "item-knn", "als", "random", "oracle")

REPORT_HEADER = ["t", "algorithm", "config", "n", "precision", "recall", "users_counted"]

# late cuts leave most of the span as training data while the remaining tail
# stays a meaningful verification window
DEFAULT_CUT_FRACTIONS = (0.88, 0.91, 0.94, 0.97)


def default_cuts(recordings: Sequence[Recording]) -> list[int]:
    """Four cut times late in the dataset's created_at span."""
    if not recordings:
        raise ValueError("cannot derive cuts from an empty dataset")
    lo = min(r.created_at for r in recordings)
    hi = max(r.created_at for r in recordings)
    return [lo + int(f * (hi - lo)) for f in DEFAULT_CUT_FRACTIONS]


@dataclass(frozen=True)
class TemporalSplit:
    t: int
    active: frozenset[str]
    r_map: Mapping[str, frozenset[str]]
    v_map: Mapping[str, frozenset[str]]


def make_split(recordings: Sequence[Recording], events: Sequence[Event], t: int) -> TemporalSplit:
    """Split the event catalog around cut time t by recording creation times.

    An event a user recorded on both sides of t counts as history only;
    v_map keeps users with nonempty truth.
    """
    created = [r.created_at for r in recordings]
    if not created or not (min(created) < t < max(created)):
        raise ValueError(f"cut t={t} is not strictly inside the dataset time span")
    recordings_by_id = {r.id: r for r in recordings}
    active = frozenset(e.id for e in events if next_occurrence(e, t) is not None)
    pre: dict[str, set[str]] = {}
    post: dict[str, set[str]] = {}
    for e in events:
        for rid in e.member_recordings:
            rec = recordings_by_id[rid]
            side = pre if rec.created_at <= t else post
            side.setdefault(rec.user, set()).add(e.id)
    r_map = {u: frozenset(s) for u, s in pre.items()}
    v_map = {}
    for u, s in post.items():
        v = frozenset((s - pre.get(u, set())) & active)
        if v:
            v_map[u] = v
    return TemporalSplit(t, active, r_map, v_map)


def precision_recall(recommended: Sequence[str], truth: Iterable[str], n: int) -> tuple[float, float]:
    """hits/n and hits/|truth| over the top n recommended ids."""
    if n < 1:
        raise ValueError("n must be >= 1")
    truth = set(truth)
    if not truth:
        raise ValueError("truth must be nonempty; filter users upstream")
    hits = len(set(recommended[:n]) & truth)
    return hits / n, hits / len(truth)


@dataclass(frozen=True)
class AlgoSpec:
    """One scoring algorithm plus its hyperparameters."""

    algorithm: str
    metric: Metric = Metric.DICE
    k: int = 300
    n_items: int = 300
    second_level: bool = False
    f: int = 100
    lam: float = 500.0
    alpha: float = 40.0
    steps: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; valid: {', '.join(ALGORITHMS)}")

    def config_label(self) -> str:
        if self.algorithm == "user-knn":
            return f"metric={self.metric.value};k={self.k};second_level={str(self.second_level).lower()}"
        if self.algorithm == "item-knn":
            return f"metric={self.metric.value};n_items={self.n_items}"
        if self.algorithm == "als":
            return f"f={self.f};lambda={self.lam:g};alpha={self.alpha:g};steps={self.steps};seed={self.seed}"
        if self.algorithm == "random":
            return f"seed={self.seed}"
        return "-"


def run_algorithm(spec: AlgoSpec, m: InteractionMatrix, candidates: Sequence[str],
                  split: TemporalSplit | None = None):
    """Score every user; the oracle additionally needs the split's truth."""
    if spec.algorithm == "mostpopular":
        return most_popular(m, candidates)
    if spec.algorithm == "user-knn":
        graph = build_user_graph(m, spec.metric, k_cap=spec.k)
        return user_knn(m, graph, spec.k, candidates, spec.second_level)
    if spec.algorithm == "item-knn":
        graph = build_item_graph(m, spec.metric, k_cap=None)
        return item_knn(m, graph, spec.n_items, candidates)
    if spec.algorithm == "als":
        model = als_train(m, spec.f, spec.lam, spec.alpha, spec.steps, spec.seed)
        return als_score(model, m, candidates)
    if spec.algorithm == "random":
        return random_rec(m, candidates, spec.seed)
    if split is None:
        raise ValueError("oracle scoring needs a temporal split")
    return oracle_rec(m, candidates, split.v_map)


@dataclass(frozen=True)
class EvalRow:
    t: int | str
    algorithm: str
    config: str
    n: int
    precision: float
    recall: float
    users_counted: int


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def write_csv(self, stream: TextIO, comment: str | None = None) -> None:
        if comment is not None:
            stream.write(f"# {comment}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in self.rows:
            writer.writerow([r.t, r.algorithm, r.config, r.n,
                             repr(r.precision), repr(r.recall), r.users_counted])

    def cell(self, t, algorithm: str, n: int) -> EvalRow:
        for r in self.rows:
            if r.t == t and r.algorithm == algorithm and r.n == n:
                return r
        raise KeyError((t, algorithm, n))


def _evaluate_cell(spec: AlgoSpec, m: InteractionMatrix, candidates: Sequence[str],
                   split: TemporalSplit, n_list: Sequence[int]) -> list[tuple[float, float, int]]:
    scored = run_algorithm(spec, m, candidates, split)
    users = sorted(split.v_map)
    results = []
    for n in n_list:
        p_sum = r_sum = 0.0
        for user in users:
            top = recommend_topn(scored[user], n)
            p, r = precision_recall(top, split.v_map[user], n)
            p_sum += p
            r_sum += r
        count = len(users)
        results.append((p_sum / count if count else 0.0,
                        r_sum / count if count else 0.0, count))
    return results


def evaluate(recordings: Sequence[Recording], events: Sequence[Event],
             specs: Sequence[AlgoSpec], t_list: Sequence[int], n_list: Sequence[int],
             threads: int = 1) -> EvalReport:
    """Per-(t, algorithm, n) macro-averaged precision/recall plus overall rows.

    The event catalog is fixed; each cut re-masks the training matrix to
    pre-t interactions only.  Cells run independently (optionally on a
    thread pool) and are merged in a fixed order, so the report does not
    depend on `threads`.
    """
    if not t_list:
        raise ValueError("t_list must be nonempty")
    if not n_list or any(n < 1 for n in n_list):
        raise ValueError("n_list values must be >= 1")
    if not specs:
        raise ValueError("specs must be nonempty")
    recordings_by_id = {r.id: r for r in recordings}
    prep = []
    for t in t_list:
        split = make_split(recordings, events, t)
        matrix = InteractionMatrix.from_events(events, recordings_by_id, cut=t)
        prep.append((split, matrix, sorted(split.active)))
    cells = [(ti, si) for ti in range(len(t_list)) for si in range(len(specs))]

    def run(cell):
        ti, si = cell
        split, matrix, candidates = prep[ti]
        return _evaluate_cell(specs[si], matrix, candidates, split, n_list)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, cells))
    else:
        outcomes = [run(c) for c in cells]

    results = dict(zip(cells, outcomes))
    rows = []
    for ti, t in enumerate(t_list):
        for si, spec in enumerate(specs):
            for ni, n in enumerate(n_list):
                p, r, c = results[(ti, si)][ni]
                rows.append(EvalRow(t, spec.algorithm, spec.config_label(), n, p, r, c))
    for si, spec in enumerate(specs):
        for ni, n in enumerate(n_list):
            cells_n = [results[(ti, si)][ni] for ti in range(len(t_list))]
            p = sum(c[0] for c in cells_n) / len(t_list)
            r = sum(c[1] for c in cells_n) / len(t_list)
            users = sum(c[2] for c in cells_n)
            rows.append(EvalRow("overall", spec.algorithm, spec.config_label(), n, p, r, users))
    return EvalReport(rows)
