"""Seeded synthetic PVR world: programs, community-structured users, recordings.

Programs sit on an hourly grid inside each (channel, periodicity) group, so
distinct programs are always separated by more than the default clustering
thresholds.  Users belong to communities of mildly unequal size and record
an in-community program with probability `affinity` (scaled by a
per-program hit/tail popularity multiplier), any other with probability
`noise`; popularity therefore carries real signal while personal taste
stays community-shaped.  Recording timings get rounded Gaussian jitter.
Scheduling times (created_at) are uniform over the span for periodic
programs but fall within a week of the broadcast for one-shots, and the
default mix is one-shot-heavy: at a late evaluation cut most of the events
users go on to record are recent arrivals with thin training support,
which is the volatile, cold-start-prone regime this pipeline targets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, TextIO

import numpy as np

from .core import (
    MINUTES_PER_WEEK,
    Periodicity,
    Recording,
    Timing,
)

SLOT_MINUTES = 60
DURATIONS = (30, 45, 60, 90)
ONE_SHOT_LEAD = MINUTES_PER_WEEK  # recordings of one-shots are set up within a week
COMMUNITY_SIZE_EXPONENT = 0.35
POPULARITY_EXPONENT = 0.4  # within-community spread between hit shows and tail shows

TRUTH_HEADER = ["recording_id", "program_id"]

DEFAULT_PERIODICITY_MIX: dict[Periodicity, float] = {
    Periodicity.NO_REPEAT: 0.85,
    Periodicity.WEEKLY: 0.0675,
    Periodicity.DAILY: 0.0375,
    Periodicity.MON_FRI: 0.03,
    Periodicity.MON_SAT: 0.015,
}


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 7
    channels: int = 20
    programs: int = 500
    users: int = 2000
    communities: int = 10
    affinity: float = 0.3
    noise: float = 0.02
    jitter_sd: float = 3.0
    span: tuple[int, int] = (0, 129600)  # 90 days
    periodicity_mix: Mapping[Periodicity, float] = field(
        default_factory=lambda: dict(DEFAULT_PERIODICITY_MIX))

    def __post_init__(self):
        if min(self.channels, self.programs, self.users, self.communities) < 1:
            raise ValueError("channels, programs, users and communities must be >= 1")
        if not (0.0 <= self.affinity <= 1.0 and 0.0 <= self.noise <= 1.0):
            raise ValueError("affinity and noise must lie in [0, 1]")
        if self.jitter_sd < 0:
            raise ValueError("jitter_sd must be >= 0")
        if self.span[0] >= self.span[1]:
            raise ValueError("span must be a nonempty (start, end) interval")
        if any(v < 0 for v in self.periodicity_mix.values()) or \
                sum(self.periodicity_mix.values()) <= 0:
            raise ValueError("periodicity_mix must be a nonnegative, nonzero distribution")


@dataclass(frozen=True)
class Program:
    id: str
    channel: str
    periodicity: Periodicity
    timing: Timing
    community: int
    title: str


@dataclass(frozen=True)
class SynthWorld:
    config: WorldConfig
    programs: tuple[Program, ...]
    recordings: tuple[Recording, ...]  # sorted by (created_at, id)
    truth: Mapping[str, str]  # recording id -> program id


def _popularity_multipliers(programs: "tuple[Program, ...]", communities: int) -> np.ndarray:
    """Audience-size multiplier per program: hits vs tail within each community.

    Rank-based with mean 1 inside every community, so overall activity stays
    at affinity/noise levels while popularity carries real signal.
    """
    mult = np.ones(len(programs))
    for c in range(communities):
        members = [g for g, p in enumerate(programs) if p.community == c]
        if not members:
            continue
        raw = (np.arange(len(members)) + 1.0) ** -POPULARITY_EXPONENT
        raw *= len(members) / raw.sum()
        mult[members] = raw
    return mult


def _community_sizes(users: int, communities: int) -> np.ndarray:
    shares = 1.0 / np.arange(1, communities + 1) ** COMMUNITY_SIZE_EXPONENT
    shares /= shares.sum()
    bounds = np.floor(np.cumsum(shares) * users + 0.5).astype(np.int64)
    bounds[-1] = users
    sizes = np.diff(np.concatenate([[0], bounds]))
    if sizes.min() < 1:  # degenerate tiny worlds: keep every community nonempty
        sizes = np.maximum(sizes, 1)
    return sizes


def _slot_starts(rng: np.random.Generator, frame_period: int | None,
                 span: tuple[int, int], count: int) -> np.ndarray:
    if frame_period is not None:
        slots = np.arange(frame_period // SLOT_MINUTES)
    else:
        first = span[0] // SLOT_MINUTES + 24  # leave a day so created_at fits before start
        slots = np.arange(first, span[1] // SLOT_MINUTES)
    if count > slots.shape[0]:
        raise ValueError(
            f"cannot place {count} programs on {slots.shape[0]} spaced slots; "
            f"use more channels or fewer programs")
    return np.sort(rng.choice(slots, size=count, replace=False)) * SLOT_MINUTES


def _rounded_jitter(rng: np.random.Generator, sd: float, size: int) -> np.ndarray:
    raw = rng.normal(0.0, sd, size) if sd > 0 else np.zeros(size)
    clip = max(1.0, 4.0 * sd)  # keep jittered intervals valid
    return np.floor(np.clip(raw, -clip, clip) + 0.5).astype(np.int64)


def generate(cfg: WorldConfig) -> SynthWorld:
    """Build the whole world from one seeded generator; byte-stable per config."""
    rng = np.random.default_rng(cfg.seed)
    period_order = list(Periodicity)
    probs = np.array([cfg.periodicity_mix.get(p, 0.0) for p in period_order], dtype=np.float64)
    probs /= probs.sum()
    prog_period = rng.choice(len(period_order), size=cfg.programs, p=probs)
    prog_channel = rng.integers(0, cfg.channels, size=cfg.programs)
    prog_duration = rng.choice(len(DURATIONS), size=cfg.programs)

    # timings per (channel, periodicity) group, spaced on the hourly grid
    prog_timing: list[Timing | None] = [None] * cfg.programs
    groups: dict[tuple[int, int], list[int]] = {}
    for g in range(cfg.programs):
        groups.setdefault((int(prog_channel[g]), int(prog_period[g])), []).append(g)
    for (_, p_idx) in sorted(groups):
        members = groups[(_, p_idx)]
        periodicity = period_order[p_idx]
        period = periodicity.frame.period
        starts = _slot_starts(rng, period, cfg.span, len(members))
        for g, start in zip(members, starts):
            dur = DURATIONS[int(prog_duration[g])]
            if period is None:
                timing = Timing(int(start), int(start) + dur, periodicity.frame)
            else:
                timing = Timing(int(start), (int(start) + dur) % period, periodicity.frame)
            prog_timing[g] = timing

    comm_sizes = _community_sizes(cfg.users, cfg.communities)
    user_comm = np.repeat(np.arange(cfg.communities), comm_sizes)[:cfg.users]
    user_ids = [f"u{i:04d}" for i in range(cfg.users)]

    programs = tuple(
        Program(
            id=f"p{g:03d}",
            channel=f"ch{int(prog_channel[g]):02d}",
            periodicity=period_order[int(prog_period[g])],
            timing=prog_timing[g],
            community=int(g % cfg.communities),
            title=f"show{g:03d}",
        )
        for g in range(cfg.programs)
    )

    popularity = _popularity_multipliers(programs, cfg.communities)
    recordings: list[Recording] = []
    truth: dict[str, str] = {}
    counter = 0
    span0, span1 = cfg.span
    for g, prog in enumerate(programs):
        base = np.where(user_comm == prog.community, cfg.affinity, cfg.noise)
        # popularity acts as a hazard exponent: ~base*mult for small base,
        # and certainty stays certainty when affinity is 1
        p_user = 1.0 - np.power(1.0 - base, popularity[g])
        takers = np.nonzero(rng.random(cfg.users) < p_user)[0]
        n = takers.shape[0]
        if n == 0:
            continue
        j_start = _rounded_jitter(rng, cfg.jitter_sd, n)
        j_end = _rounded_jitter(rng, cfg.jitter_sd, n)
        period = prog.periodicity.frame.period
        if period is None:
            lo = max(span0, prog.timing.start - ONE_SHOT_LEAD)
            created = rng.integers(lo, prog.timing.start, size=n)
        else:
            created = rng.integers(span0, span1, size=n)
        for u, js, je, at in zip(takers, j_start, j_end, created):
            if period is None:
                start = prog.timing.start + int(js)
                # large jitter_sd can invert a short interval; keep it valid
                end = max(prog.timing.end + int(je), start + 1)
                timing = Timing(start, end, prog.periodicity.frame)
            else:
                start = (prog.timing.start + int(js)) % period
                end = (prog.timing.end + int(je)) % period
                if end == start:
                    end = (end + 1) % period
                timing = Timing(start, end, prog.periodicity.frame)
            rid = f"r{counter:06d}"
            counter += 1
            recordings.append(Recording(
                id=rid,
                user=user_ids[int(u)],
                channel=prog.channel,
                periodicity=prog.periodicity,
                title=prog.title,
                timing=timing,
                created_at=int(at),
            ))
            truth[rid] = prog.id
    recordings.sort(key=lambda r: (r.created_at, r.id))
    return SynthWorld(cfg, programs, tuple(recordings), truth)


def write_truth(stream: TextIO, truth: Mapping[str, str], comment: str | None = None) -> None:
    if comment is not None:
        stream.write(f"# {comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRUTH_HEADER)
    for rid in sorted(truth):
        writer.writerow([rid, truth[rid]])


def read_truth(stream: TextIO) -> dict[str, str]:
    reader = csv.reader(stream)
    out: dict[str, str] = {}
    header_seen = False
    for row in reader:
        if not row or row[0].startswith("#"):
            continue
        if not header_seen:
            if row != TRUTH_HEADER:
                raise ValueError("bad truth header")
            header_seen = True
            continue
        out[row[0]] = row[1]
    return out
