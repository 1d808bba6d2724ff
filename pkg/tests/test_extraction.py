import io
import itertools

import numpy as np
import pytest

from pvrec.core import Periodicity, Timing, timing_distance
from pvrec.extraction import (
    Cluster,
    ExtractionConfig,
    aggregate,
    choose_title,
    cluster_batch,
    collapse,
    elect_centroid,
    read_events,
    run_pipeline,
    write_events,
)
from pvrec.synthgen import WorldConfig, generate

from conftest import make_recording

CFG = ExtractionConfig()


def daily(rid, start, dur=60, user=None, title="News", created_at=100, channel="ch1"):
    return make_recording(rid=rid, user=user or f"user-{rid}", channel=channel,
                          periodicity=Periodicity.DAILY, title=title,
                          start=start % 1440, end=(start + dur) % 1440,
                          created_at=created_at)


class TestChooseTitle:
    def test_majority(self):
        recs = [daily("r1", 0, title="News"), daily("r2", 0, title="News"),
                daily("r3", 0, title="TG1")]
        assert choose_title(recs) == "News"

    def test_lexicographic_tie(self):
        recs = [daily("r1", 0, title="B"), daily("r2", 0, title="A")]
        assert choose_title(recs) == "A"

    def test_singleton(self):
        assert choose_title([daily("r1", 0, title="x")]) == "x"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            choose_title([])


class TestElectCentroid:
    def test_median_like_winner(self):
        recs = [daily("r1", 1200), daily("r2", 1205), daily("r3", 1210)]
        assert elect_centroid(recs) == "r2"

    def test_singleton(self):
        assert elect_centroid([daily("r9", 700)]) == "r9"

    def test_tie_broken_by_created_at_then_id(self):
        a = daily("r2", 1200, created_at=50)
        b = daily("r1", 1210, created_at=60)
        assert elect_centroid([a, b]) == "r2"
        c = daily("r0", 1210, created_at=50)
        assert elect_centroid([a, c]) == "r0"

    def test_empty_and_heterogeneous_rejected(self):
        with pytest.raises(ValueError):
            elect_centroid([])
        with pytest.raises(ValueError):
            elect_centroid([daily("r1", 0), make_recording(rid="r2", periodicity=Periodicity.WEEKLY)])


class TestClusterBatch:
    def test_threshold_splits_groups(self):
        recs = [daily("r1", 1200), daily("r2", 1205), daily("r3", 1290)]
        clusters = cluster_batch(recs, CFG)
        parts = sorted(tuple(sorted(m.id for m in c.members)) for c in clusters)
        assert parts == [("r1", "r2"), ("r3",)]

    def test_channel_separates(self):
        recs = [daily("r1", 1200), daily("r2", 1200, channel="ch2")]
        assert len(cluster_batch(recs, CFG)) == 2

    def test_single_linkage_chains(self):
        recs = [daily("r1", 1200), daily("r2", 1210), daily("r3", 1220)]
        (cluster,) = cluster_batch(recs, CFG)
        assert {m.id for m in cluster.members} == {"r1", "r2", "r3"}
        assert cluster.centroid_id == "r2"

    def test_empty_input(self):
        assert cluster_batch([], CFG) == []

    def test_midnight_wrap_clusters_together(self):
        recs = [daily("r1", 1435, dur=30), daily("r2", 5, dur=30)]
        (cluster,) = cluster_batch(recs, CFG)
        assert len(cluster.members) == 2


def cluster_of(recs):
    (c,) = cluster_batch(recs, CFG)
    return c


class TestAggregate:
    def test_weighted_mean_absorb(self):
        old_members = [daily(f"o{i}", 1206, user=f"u{i}", created_at=10) for i in range(9)]
        by_id = {r.id: r for r in old_members}
        (store,) = aggregate([cluster_of(old_members)], [], CFG, by_id)
        assert store.timing.start == 1206

        new_members = [daily(f"n{i}", 1202, user=f"v{i}", created_at=70) for i in range(3)]
        by_id.update({r.id: r for r in new_members})
        (merged,) = aggregate([cluster_of(new_members)], [store], CFG, by_id)
        assert merged.timing.start == 1205  # 0.75 * 1206 + 0.25 * 1202
        assert merged.supporters == {f"u{i}" for i in range(9)} | {f"v{i}" for i in range(3)}
        assert len(merged.member_recordings) == 12
        assert merged.id == store.id

    def test_unmatched_cluster_becomes_event(self):
        recs = [daily("r1", 600, user="u1")]
        by_id = {"r1": recs[0]}
        (ev,) = aggregate([cluster_of(recs)], [], CFG, by_id)
        assert ev.timing == recs[0].timing
        assert ev.supporters == {"u1"}

    def test_equidistant_goes_to_older_event(self):
        a = [daily("a1", 1200, user="u1", created_at=10)]
        b = [daily("b1", 1220, user="u2", created_at=20)]
        by_id = {r.id: r for r in a + b}
        events = aggregate([cluster_of(a)], [], CFG, by_id)
        events = aggregate([cluster_of(b)], events, CFG, by_id)
        assert len(events) == 2
        older = min(events, key=lambda e: e.id)
        mid = [daily("m1", 1210, user="u3", created_at=30)]
        by_id.update({r.id: r for r in mid})
        merged = aggregate([cluster_of(mid)], events, CFG, by_id)
        absorbed = [e for e in merged if "m1" in e.member_recordings]
        assert len(absorbed) == 1 and absorbed[0].id == older.id


class TestCollapse:
    def test_equal_support_midpoint(self):
        # deltas tight enough that aggregation keeps the two events apart,
        # collapse thresholds wide enough to merge them
        cfg = ExtractionConfig(delta_b=5, delta_f=5, collapse_b=10, collapse_f=10)
        a = [daily("a1", 1200, user="u1"), daily("a2", 1200, user="u2")]
        b = [daily("b1", 1208, user="u3"), daily("b2", 1208, user="u4")]
        by_id = {r.id: r for r in a + b}
        events = aggregate([cluster_of(a)], [], cfg, by_id)
        events = aggregate([cluster_of(b)], events, cfg, by_id)
        assert len(events) == 2
        (merged,) = collapse(events, cfg, by_id)
        assert merged.timing.start == 1204
        assert merged.id == min(e.id for e in events)
        assert merged.supporters == {"u1", "u2", "u3", "u4"}

    def test_channels_stay_apart(self):
        a = daily("a1", 1200, user="u1")
        b = daily("b1", 1200, user="u2", channel="ch2")
        by_id = {"a1": a, "b1": b}
        events = aggregate(cluster_batch([a, b], CFG), [], CFG, by_id)
        assert collapse(events, CFG, by_id) == sorted(events, key=lambda e: e.id)

    def test_fixpoint_when_nothing_merges(self):
        a = daily("a1", 600, user="u1")
        b = daily("b1", 700, user="u2")
        by_id = {"a1": a, "b1": b}
        events = aggregate(cluster_batch([a, b], CFG), [], CFG, by_id)
        assert collapse(events, CFG, by_id) == events

    def test_idempotent_on_random_worlds(self, rng):
        for _ in range(10):
            recs = [daily(f"r{i}", int(rng.integers(0, 1440)), user=f"u{i % 7}",
                          created_at=int(rng.integers(0, 50)))
                    for i in range(int(rng.integers(2, 25)))]
            by_id = {r.id: r for r in recs}
            events = aggregate(cluster_batch(recs, CFG), [], CFG, by_id)
            once = collapse(events, CFG, by_id)
            twice = collapse(once, CFG, by_id)
            assert once == twice


class TestRunPipeline:
    def test_single_window_matches_manual_composition(self):
        recs = sorted([daily("r1", 1200, created_at=5), daily("r2", 1205, created_at=20),
                       daily("r3", 900, created_at=40)], key=lambda r: r.created_at)
        by_id = {r.id: r for r in recs}
        via_pipeline = run_pipeline(recs, CFG)
        manual = collapse(aggregate(cluster_batch(recs, CFG), [], CFG, by_id), CFG, by_id)
        assert via_pipeline == manual

    def test_two_windows_union_supporters(self):
        first = daily("r1", 1200, user="u1", created_at=30)
        second = daily("r2", 1205, user="u2", created_at=90)  # next hourly window
        events = run_pipeline([first, second], CFG)
        (ev,) = events
        assert ev.supporters == {"u1", "u2"}
        assert ev.member_recordings == {"r1", "r2"}

    def test_empty_input(self):
        assert run_pipeline([], CFG) == []

    def test_unsorted_rejected(self):
        recs = [daily("r1", 0, created_at=100), daily("r2", 0, created_at=50)]
        with pytest.raises(ValueError, match="sorted"):
            run_pipeline(recs, CFG)

    def test_partition_and_homogeneity(self, rng):
        world = generate(WorldConfig(seed=5, channels=4, programs=30, users=60,
                                     communities=3, span=(0, 30000)))
        events = run_pipeline(list(world.recordings), CFG)
        seen = list(itertools.chain.from_iterable(e.member_recordings for e in events))
        assert sorted(seen) == sorted(r.id for r in world.recordings)
        by_id = {r.id: r for r in world.recordings}
        for e in events:
            assert e.supporters == {by_id[rid].user for rid in e.member_recordings}
            assert all(by_id[rid].channel == e.channel for rid in e.member_recordings)
            assert all(by_id[rid].periodicity == e.periodicity for rid in e.member_recordings)
            assert e.supporters

    def test_order_robust_within_batch(self, rng):
        recs = [daily(f"r{i}", int(rng.integers(0, 200)), user=f"u{i % 5}",
                      created_at=int(rng.integers(0, 59)))
                for i in range(20)]
        recs.sort(key=lambda r: r.created_at)
        baseline = run_pipeline(recs, CFG)
        for _ in range(5):
            perm = list(recs)
            rng.shuffle(perm)
            perm.sort(key=lambda r: r.created_at)  # same batch, shuffled within
            assert run_pipeline(perm, CFG) == baseline

    def test_recovers_generating_programs_with_small_jitter(self):
        world = generate(WorldConfig(seed=11, channels=5, programs=40, users=80,
                                     communities=4, jitter_sd=1.0, span=(0, 40000)))
        events = run_pipeline(list(world.recordings), CFG)
        assert len(events) == len({p.id for p in world.programs
                                   if any(t == p.id for t in world.truth.values())})
        # every event's members map to exactly one generating program
        for e in events:
            assert len({world.truth[rid] for rid in e.member_recordings}) == 1


class TestEventsCsv:
    def test_roundtrip_supporters_authoritative(self):
        recs = [daily("r1", 1200, user="u2"), daily("r2", 1203, user="u1")]
        by_id = {r.id: r for r in recs}
        events = aggregate(cluster_batch(recs, CFG), [], CFG, by_id)
        buf = io.StringIO()
        write_events(buf, events, comment="cfg=test")
        text = buf.getvalue()
        assert text.startswith("# cfg=test\n")
        back = read_events(io.StringIO(text))
        assert len(back) == 1
        assert back[0].supporters == {"u1", "u2"}
        assert back[0].timing == events[0].timing
        assert back[0].member_recordings == frozenset()
