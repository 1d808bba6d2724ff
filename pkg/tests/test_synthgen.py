import io
from collections import defaultdict

import pytest

from pvrec.core import Periodicity, circular_distance, recordings_to_csv
from pvrec.synthgen import (
    WorldConfig,
    generate,
    read_truth,
    write_truth,
)

SMALL = WorldConfig(seed=3, channels=5, programs=40, users=50, communities=4, span=(0, 50000))


class TestWorldConfig:
    def test_defaults_are_valid(self):
        cfg = WorldConfig()
        assert cfg.users == 2000 and cfg.programs == 500
        assert cfg.affinity == 0.3 and cfg.noise == 0.02

    @pytest.mark.parametrize("kwargs", [
        {"affinity": 1.5}, {"noise": -0.1}, {"jitter_sd": -1.0},
        {"span": (100, 100)}, {"communities": 0},
        {"periodicity_mix": {Periodicity.DAILY: -1.0}},
    ])
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(ValueError):
            WorldConfig(**kwargs)


class TestGenerate:
    def test_zero_jitter_copies_program_timing(self):
        world = generate(WorldConfig(seed=1, channels=4, programs=20, users=30,
                                     communities=3, jitter_sd=0.0, span=(0, 30000)))
        by_id = {p.id: p for p in world.programs}
        for r in world.recordings:
            prog = by_id[world.truth[r.id]]
            assert r.timing == prog.timing
            assert r.channel == prog.channel and r.periodicity == prog.periodicity

    def test_saturation_world(self):
        cfg = WorldConfig(seed=2, channels=3, programs=10, users=12, communities=1,
                          affinity=1.0, noise=0.0, span=(0, 30000))
        world = generate(cfg)
        per_user = defaultdict(set)
        for r in world.recordings:
            per_user[r.user].add(world.truth[r.id])
        assert len(per_user) == 12
        assert all(len(progs) == 10 for progs in per_user.values())

    def test_seed_reproducibility_byte_identical(self):
        a = generate(SMALL)
        b = generate(SMALL)
        assert recordings_to_csv(a.recordings) == recordings_to_csv(b.recordings)
        assert a.truth == b.truth
        c = generate(WorldConfig(seed=4, channels=5, programs=40, users=50,
                                 communities=4, span=(0, 50000)))
        assert recordings_to_csv(c.recordings) != recordings_to_csv(a.recordings)

    def test_truth_covers_every_recording_once(self):
        world = generate(SMALL)
        assert sorted(world.truth) == sorted(r.id for r in world.recordings)

    def test_recordings_sorted_by_created_at(self):
        world = generate(SMALL)
        created = [r.created_at for r in world.recordings]
        assert created == sorted(created)

    def test_one_shot_created_shortly_before_start(self):
        world = generate(SMALL)
        by_id = {p.id: p for p in world.programs}
        for r in world.recordings:
            if r.periodicity is Periodicity.NO_REPEAT:
                prog = by_id[world.truth[r.id]]
                assert r.created_at < prog.timing.start

    def test_program_spacing_exceeds_double_delta(self):
        world = generate(WorldConfig())
        groups = defaultdict(list)
        for p in world.programs:
            groups[(p.channel, p.periodicity)].append(p)
        for (_, periodicity), progs in groups.items():
            period = periodicity.frame.period
            starts = [p.timing.start for p in progs]
            for i in range(len(starts)):
                for j in range(i + 1, len(starts)):
                    if period is None:
                        gap = abs(starts[i] - starts[j])
                    else:
                        gap = circular_distance(starts[i], starts[j], period)
                    assert gap > 30, (periodicity, starts[i], starts[j])


class TestTruthCsv:
    def test_roundtrip(self):
        world = generate(SMALL)
        buf = io.StringIO()
        write_truth(buf, world.truth, comment="seed=3")
        back = read_truth(io.StringIO(buf.getvalue()))
        assert back == dict(world.truth)
