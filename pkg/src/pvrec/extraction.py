"""Turns the raw recording multiset into discrete events.

Recordings are processed in consecutive ingestion windows.  Each window is
clustered per (channel, periodicity) group under a two-sided timing
threshold (single linkage, so the pairwise relation is closed
transitively), new clusters are absorbed into the nearest existing event
or become fresh events, and events that drifted within a collapse
threshold of each other are merged.  Event timings move as
support-weighted means, so established events are stable against single
noisy recordings.
"""

from __future__ import annotations

import csv
import itertools
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from . import kernels
from .core import (
    Event,
    Frame,
    Periodicity,
    Recording,
    Timing,
    iround,
    timing_distance,
)

EVENTS_HEADER = ["id", "channel", "periodicity", "title", "start", "end",
                 "supporters", "member_count", "created_at"]


@dataclass(frozen=True)
class ExtractionConfig:
    delta_b: int = 15
    delta_f: int = 15
    collapse_b: int = 15
    collapse_f: int = 15
    batch_length: int = 60

    def __post_init__(self):
        for name in ("delta_b", "delta_f", "collapse_b", "collapse_f", "batch_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Cluster:
    """One batch's worth of recordings judged to be the same broadcast."""

    members: tuple[Recording, ...]
    centroid_id: str
    channel: str
    periodicity: Periodicity

    @property
    def centroid(self) -> Recording:
        for m in self.members:
            if m.id == self.centroid_id:
                return m
        raise KeyError(self.centroid_id)

    @property
    def timing(self) -> Timing:
        return self.centroid.timing

    def users(self) -> frozenset[str]:
        return frozenset(m.user for m in self.members)


def choose_title(member_recordings: Iterable[Recording]) -> str:
    """Most frequent exact title; lexicographic tie-break."""
    counts = Counter(r.title for r in member_recordings)
    if not counts:
        raise ValueError("cannot choose a title from no recordings")
    top = max(counts.values())
    return min(t for t, c in counts.items() if c == top)


def _pairwise_sums(members: Sequence[Recording]) -> np.ndarray:
    period = members[0].periodicity.frame.period or 0
    starts = np.array([m.timing.start for m in members], dtype=np.int64)
    ends = np.array([m.timing.end for m in members], dtype=np.int64)
    ds = np.abs(starts[:, None] - starts[None, :])
    de = np.abs(ends[:, None] - ends[None, :])
    if period:
        ds = np.minimum(ds, period - ds)
        de = np.minimum(de, period - de)
    return (ds + de).sum(axis=1)


def elect_centroid(members: Iterable[Recording]) -> str:
    """Member minimizing summed timing distance to the others.

    Ties go to the earliest created_at, then the lexicographically
    smallest id.
    """
    ordered = sorted(members, key=lambda r: (r.created_at, r.id))
    if not ordered:
        raise ValueError("cannot elect a centroid from no recordings")
    key = (ordered[0].channel, ordered[0].periodicity)
    if any((m.channel, m.periodicity) != key for m in ordered):
        raise ValueError("centroid election requires a homogeneous cluster")
    sums = _pairwise_sums(ordered)
    return ordered[int(np.argmin(sums))].id


def cluster_batch(recordings: Sequence[Recording], cfg: ExtractionConfig) -> list[Cluster]:
    """Partition one ingestion batch into per-(channel, periodicity) clusters.

    Within a group the pairwise predicate (start distance < delta_b AND
    end distance < delta_f) is closed transitively: chains merge.
    """
    groups: dict[tuple[str, Periodicity], list[Recording]] = defaultdict(list)
    for r in recordings:
        groups[(r.channel, r.periodicity)].append(r)
    clusters: list[Cluster] = []
    for (channel, periodicity) in sorted(groups, key=lambda k: (k[0], k[1].value)):
        members = sorted(groups[(channel, periodicity)], key=lambda r: (r.created_at, r.id))
        period = periodicity.frame.period or 0
        starts = np.array([m.timing.start for m in members], dtype=np.int64)
        ends = np.array([m.timing.end for m in members], dtype=np.int64)
        labels = kernels.linkage_labels(starts, ends, period, cfg.delta_b, cfg.delta_f)
        for label in range(int(labels.max()) + 1 if members else 0):
            sub = tuple(m for m, l in zip(members, labels) if l == label)
            clusters.append(Cluster(sub, elect_centroid(sub), channel, periodicity))
    clusters.sort(key=lambda c: (c.channel, c.periodicity.value,
                                 c.centroid.created_at, c.centroid_id))
    return clusters


def _signed_wrap(x: int, anchor: int, period: int) -> int:
    return (x - anchor + period // 2) % period - period // 2


def _mean_timing(entries: Sequence[tuple[Timing, int]], frame: Frame) -> Timing:
    """Weight-averaged timing; cyclic values unwrap around the heaviest entry."""
    total = sum(w for _, w in entries)
    period = frame.period
    if period is None:
        start = iround(sum(t.start * w for t, w in entries) / total)
        end = iround(sum(t.end * w for t, w in entries) / total)
        return Timing(start, end, frame)
    anchor = max(entries, key=lambda tw: tw[1])[0]
    start = iround(sum((anchor.start + _signed_wrap(t.start, anchor.start, period)) * w
                       for t, w in entries) / total) % period
    end = iround(sum((anchor.end + _signed_wrap(t.end, anchor.end, period)) * w
                     for t, w in entries) / total) % period
    if end == start:
        # degenerate rounding of very short intervals; keep the timing valid
        end = (start + 1) % period
    return Timing(start, end, frame)


_ID_RE = re.compile(r"(\d+)$")


def _next_counter(events: Iterable[Event]) -> "itertools.count":
    top = 0
    for e in events:
        m = _ID_RE.search(e.id)
        if m:
            top = max(top, int(m.group(1)))
    return itertools.count(top + 1)


def _mint(counter) -> str:
    return f"ev{next(counter):06d}"


def _event_from_cluster(cluster: Cluster, eid: str) -> Event:
    return Event(
        id=eid,
        supporters=cluster.users(),
        channel=cluster.channel,
        title=choose_title(cluster.members),
        timing=cluster.timing,
        periodicity=cluster.periodicity,
        member_recordings=frozenset(m.id for m in cluster.members),
        created_at=min(m.created_at for m in cluster.members),
    )


def _absorb(event: Event, cluster: Cluster, recordings_by_id: Mapping) -> Event:
    members = event.member_recordings | frozenset(m.id for m in cluster.members)
    recs = [recordings_by_id[rid] for rid in sorted(members)]
    timing = _mean_timing(
        [(event.timing, len(event.member_recordings)), (cluster.timing, len(cluster.members))],
        event.periodicity.frame,
    )
    return Event(
        id=event.id,
        supporters=frozenset(r.user for r in recs),
        channel=event.channel,
        title=choose_title(recs),
        timing=timing,
        periodicity=event.periodicity,
        member_recordings=members,
        created_at=min(event.created_at, min(r.created_at for r in recs)),
    )


def _aggregate_group(clusters: Sequence[Cluster], group: dict[str, Event],
                     cfg: ExtractionConfig, recordings_by_id: Mapping, counter) -> None:
    for cluster in clusters:
        best: tuple[int, str] | None = None
        for eid in sorted(group):
            ev = group[eid]
            ds, de = timing_distance(ev.timing, cluster.timing, cluster.periodicity)
            if ds < cfg.delta_b and de < cfg.delta_f:
                cand = (ds + de, eid)
                if best is None or cand < best:
                    best = cand
        if best is None:
            fresh = _event_from_cluster(cluster, _mint(counter))
            group[fresh.id] = fresh
        else:
            eid = best[1]
            group[eid] = _absorb(group[eid], cluster, recordings_by_id)


def _merge_events(component: Sequence[Event], recordings_by_id: Mapping) -> Event:
    component = sorted(component, key=lambda e: e.id)
    members = frozenset(rid for e in component for rid in e.member_recordings)
    recs = [recordings_by_id[rid] for rid in sorted(members)]
    timing = _mean_timing([(e.timing, len(e.member_recordings)) for e in component],
                          component[0].periodicity.frame)
    return Event(
        id=component[0].id,
        supporters=frozenset(r.user for r in recs),
        channel=component[0].channel,
        title=choose_title(recs),
        timing=timing,
        periodicity=component[0].periodicity,
        member_recordings=members,
        created_at=min(e.created_at for e in component),
    )


def _collapse_group(group: dict[str, Event], cfg: ExtractionConfig,
                    recordings_by_id: Mapping) -> dict[str, Event]:
    # iterate to a fixpoint: merging moves timings, which can admit new merges
    while len(group) > 1:
        events = [group[eid] for eid in sorted(group)]
        period = events[0].periodicity.frame.period or 0
        starts = np.array([e.timing.start for e in events], dtype=np.int64)
        ends = np.array([e.timing.end for e in events], dtype=np.int64)
        labels = kernels.linkage_labels(starts, ends, period, cfg.collapse_b, cfg.collapse_f)
        if labels.max() == len(events) - 1:
            break
        merged: dict[str, Event] = {}
        for label in range(int(labels.max()) + 1):
            component = [e for e, l in zip(events, labels) if l == label]
            ev = component[0] if len(component) == 1 else _merge_events(component, recordings_by_id)
            merged[ev.id] = ev
        group = merged
    return group


def _group_events(events: Iterable[Event]) -> dict[tuple[str, Periodicity], dict[str, Event]]:
    store: dict[tuple[str, Periodicity], dict[str, Event]] = defaultdict(dict)
    for e in events:
        store[(e.channel, e.periodicity)][e.id] = e
    return store


def _flatten(store) -> list[Event]:
    return sorted((e for group in store.values() for e in group.values()), key=lambda e: e.id)


def aggregate(new_clusters: Sequence[Cluster], existing: Iterable[Event],
              cfg: ExtractionConfig, recordings_by_id: Mapping) -> list[Event]:
    """Absorb each cluster into its nearest matching event, or start a new one.

    A cluster matches events of equal channel and periodicity whose timing
    lies within (delta_b, delta_f) of the cluster centroid; the nearest by
    summed distance absorbs it (ties to the oldest event id).  Absorption
    unions supporters and member recordings, re-chooses the title, and moves
    the event timing to the member-count-weighted mean.
    """
    store = _group_events(existing)
    counter = _next_counter(e for g in store.values() for e in g.values())
    by_key: dict[tuple[str, Periodicity], list[Cluster]] = defaultdict(list)
    for c in new_clusters:
        by_key[(c.channel, c.periodicity)].append(c)
    for key in sorted(by_key, key=lambda k: (k[0], k[1].value)):
        _aggregate_group(by_key[key], store[key], cfg, recordings_by_id, counter)
    return _flatten(store)


def collapse(events: Iterable[Event], cfg: ExtractionConfig,
             recordings_by_id: Mapping) -> list[Event]:
    """Merge same-channel same-periodicity events within the collapse thresholds.

    Merging is transitive and repeated until stable, so the result is a
    fixpoint: collapsing twice changes nothing.  The merged event keeps the
    oldest id and the member-count-weighted mean timing.
    """
    store = _group_events(events)
    for key in sorted(store, key=lambda k: (k[0], k[1].value)):
        store[key] = _collapse_group(store[key], cfg, recordings_by_id)
    return _flatten(store)


def run_pipeline(recordings: Sequence[Recording], cfg: ExtractionConfig) -> list[Event]:
    """Cluster, aggregate and collapse recordings in consecutive ingestion windows.

    Input must be sorted by created_at.  Windows are aligned to absolute
    multiples of cfg.batch_length.  Only groups touched by a window need
    collapsing: untouched groups are already at their collapse fixpoint.
    """
    for prev, cur in zip(recordings, recordings[1:]):
        if cur.created_at < prev.created_at:
            raise ValueError("recordings must be sorted by created_at")
    store: dict[tuple[str, Periodicity], dict[str, Event]] = defaultdict(dict)
    counter = itertools.count(1)
    recordings_by_id = {r.id: r for r in recordings}
    for _, batch_iter in itertools.groupby(recordings, key=lambda r: r.created_at // cfg.batch_length):
        clusters = cluster_batch(list(batch_iter), cfg)
        by_key: dict[tuple[str, Periodicity], list[Cluster]] = defaultdict(list)
        for c in clusters:
            by_key[(c.channel, c.periodicity)].append(c)
        for key in sorted(by_key, key=lambda k: (k[0], k[1].value)):
            _aggregate_group(by_key[key], store[key], cfg, recordings_by_id, counter)
            store[key] = _collapse_group(store[key], cfg, recordings_by_id)
    return _flatten(store)


def write_events(stream: TextIO, events: Iterable[Event], comment: str | None = None) -> None:
    """Events CSV; supporters are ;-joined sorted user ids (ids must not contain ;)."""
    if comment is not None:
        stream.write(f"# {comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    for e in sorted(events, key=lambda e: e.id):
        writer.writerow([
            e.id, e.channel, e.periodicity.value, e.title,
            e.timing.start, e.timing.end,
            ";".join(sorted(e.supporters)), len(e.member_recordings), e.created_at,
        ])


def read_events(stream: TextIO) -> list[Event]:
    """Read an events CSV back.

    Member recording ids are not serialized, so re-read events carry an
    empty member set; the supporter list is authoritative.
    """
    events = []
    reader = csv.reader(stream)
    header_seen = False
    for row in reader:
        if not row or row[0].startswith("#"):
            continue
        if not header_seen:
            if row != EVENTS_HEADER:
                raise ValueError(f"bad events header on line {reader.line_num}")
            header_seen = True
            continue
        if len(row) != len(EVENTS_HEADER):
            raise ValueError(f"line {reader.line_num}: expected {len(EVENTS_HEADER)} fields")
        eid, channel, ptoken, title, start, end, supporters, _count, created = row
        periodicity = Periodicity.parse(ptoken)
        events.append(Event(
            id=eid,
            supporters=frozenset(s for s in supporters.split(";") if s),
            channel=channel,
            title=title,
            timing=Timing(int(start), int(end), periodicity.frame),
            periodicity=periodicity,
            member_recordings=frozenset(),
            created_at=int(created),
        ))
    return events
