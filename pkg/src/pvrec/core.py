"""Domain types and periodic-time arithmetic for PVR recording logs.

All times are integer minutes on a linear axis whose origin falls on a
Monday 00:00, so weekday and day/week offsets are plain modular
arithmetic.  Periodic timings are stored as offsets inside their cycle
(day or week); one-shot timings are absolute minutes.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

MINUTES_PER_DAY = 1440
MINUTES_PER_WEEK = 7 * MINUTES_PER_DAY

RECORDINGS_HEADER = ["id", "user", "channel", "periodicity", "title", "start", "end", "created_at"]


class Frame(enum.Enum):
    """Reference frame of a timing: absolute minutes, or an offset inside a cycle."""

    ABSOLUTE = "absolute"
    WEEK = "week"
    DAY = "day"

    @property
    def period(self) -> int | None:
        """Cycle length in minutes; None for the absolute frame."""
        if self is Frame.WEEK:
            return MINUTES_PER_WEEK
        if self is Frame.DAY:
            return MINUTES_PER_DAY
        return None


class Periodicity(enum.Enum):
    NO_REPEAT = "no-repeat"
    WEEKLY = "weekly"
    DAILY = "daily"
    MON_FRI = "mon-fri"
    MON_SAT = "mon-sat"

    @classmethod
    def parse(cls, token: str) -> "Periodicity":
        for p in cls:
            if p.value == token:
                return p
        raise ValueError(f"unknown periodicity {token!r}")

    @property
    def frame(self) -> Frame:
        if self is Periodicity.NO_REPEAT:
            return Frame.ABSOLUTE
        if self is Periodicity.WEEKLY:
            return Frame.WEEK
        return Frame.DAY

    @property
    def period_length(self) -> int:
        """Minutes between consecutive occurrences; undefined for one-shots."""
        if self is Periodicity.NO_REPEAT:
            raise ValueError("no-repeat recordings have no period")
        return MINUTES_PER_WEEK if self is Periodicity.WEEKLY else MINUTES_PER_DAY

    @property
    def weekdays(self) -> frozenset[int]:
        """Admissible weekdays for an occurrence start (0 = Monday)."""
        if self is Periodicity.MON_FRI:
            return frozenset(range(5))
        if self is Periodicity.MON_SAT:
            return frozenset(range(6))
        return frozenset(range(7))


def weekday_of(t: int) -> int:
    """Weekday of an absolute minute, 0 = Monday .. 6 = Sunday."""
    return (t % MINUTES_PER_WEEK) // MINUTES_PER_DAY


@dataclass(frozen=True)
class Timing:
    """Start/end pair in a frame.

    Cyclic frames allow end < start (the interval wraps past the cycle
    boundary); duration is taken modulo the cycle and must be positive.
    """

    start: int
    end: int
    frame: Frame

    def __post_init__(self):
        period = self.frame.period
        if period is None:
            if self.end <= self.start:
                raise ValueError(f"absolute timing must have end > start, got {self.start}..{self.end}")
        else:
            if not (0 <= self.start < period and 0 <= self.end < period):
                raise ValueError(f"timing out of range [0,{period}): {self.start}..{self.end}")
            if self.start == self.end:
                raise ValueError("cyclic timing must have nonzero duration")

    @property
    def duration(self) -> int:
        period = self.frame.period
        if period is None:
            return self.end - self.start
        return (self.end - self.start) % period


@dataclass(frozen=True)
class Recording:
    """One user's scheduled capture, as entered before the program starts."""

    id: str
    user: str
    channel: str
    periodicity: Periodicity
    title: str
    timing: Timing
    created_at: int


@dataclass(frozen=True)
class Event:
    """A discrete recommendable element aggregated from similar recordings."""

    id: str
    supporters: frozenset[str]
    channel: str
    title: str
    timing: Timing
    periodicity: Periodicity
    member_recordings: frozenset[str]
    created_at: int


@dataclass(frozen=True)
class ParseError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def circular_distance(x: int, y: int, period: int) -> int:
    """Shortest distance between two offsets on a cycle of the given period."""
    d = abs(x - y) % period
    return min(d, period - d)


def timing_distance(a: Timing, b: Timing, periodicity: Periodicity) -> tuple[int, int]:
    """Start and end distances between two timings under a periodicity's frame.

    Plain absolute differences for one-shots; circular distances on the
    cyclic frames, applied to starts and ends independently.
    """
    frame = periodicity.frame
    if a.frame is not frame or b.frame is not frame:
        raise ValueError(f"timing frames {a.frame.value}/{b.frame.value} do not match periodicity {periodicity.value}")
    period = frame.period
    if period is None:
        return abs(a.start - b.start), abs(a.end - b.end)
    return (
        circular_distance(a.start, b.start, period),
        circular_distance(a.end, b.end, period),
    )


def next_occurrence(e, t: int) -> int | None:
    """First start time strictly after t at which `e` occurs, or None if expired.

    Accepts anything with `timing` and `periodicity` attributes (events or
    recordings).  One-shots occur once, at their absolute start; periodic
    elements recur forever, with mon-fri/mon-sat skipping inadmissible
    weekdays.
    """
    p: Periodicity = e.periodicity
    start = e.timing.start
    if p is Periodicity.NO_REPEAT:
        return start if start > t else None
    period = p.period_length
    candidate = t - (t % period) + start
    if candidate <= t:
        candidate += period
    while weekday_of(candidate) not in p.weekdays:
        candidate += period
    return candidate


def iround(x: float) -> int:
    """Round to the nearest minute, halves up; deterministic across platforms."""
    return int(math.floor(x + 0.5))


def _parse_row(row: list[str], line: int) -> Recording:
    if len(row) != len(RECORDINGS_HEADER):
        raise ValueError(f"expected {len(RECORDINGS_HEADER)} fields, got {len(row)}")
    rid, user, channel, ptoken, title, start_s, end_s, created_s = row
    if not rid or not user or not channel:
        raise ValueError("id, user and channel must be nonempty")
    periodicity = Periodicity.parse(ptoken)
    try:
        start, end, created_at = int(start_s), int(end_s), int(created_s)
    except ValueError:
        raise ValueError(f"bad integer in row: start={start_s!r} end={end_s!r} created_at={created_s!r}")
    timing = Timing(start, end, periodicity.frame)
    return Recording(rid, user, channel, periodicity, title, timing, created_at)


def parse_recordings(stream: TextIO) -> tuple[list[Recording], list[ParseError]]:
    """Parse a recordings CSV, collecting structured per-line errors.

    The stream must be UTF-8 CSV with the canonical header; leading `#`
    comment lines (config echoes) are skipped.  Bad rows are reported with
    their line number and parsing continues.
    """
    recordings: list[Recording] = []
    errors: list[ParseError] = []
    header_seen = False
    # csv.reader tracks physical line numbers for us, including quoted newlines
    reader = csv.reader(stream)
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if row[0].startswith("#"):
            continue
        if not header_seen:
            if row != RECORDINGS_HEADER:
                errors.append(ParseError(line, f"bad header: expected {','.join(RECORDINGS_HEADER)}"))
            header_seen = True
            continue
        try:
            recordings.append(_parse_row(row, line))
        except ValueError as exc:
            errors.append(ParseError(line, str(exc)))
    return recordings, errors


def write_recordings(stream: TextIO, recordings: Iterable[Recording], comment: str | None = None) -> None:
    if comment is not None:
        stream.write(f"# {comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RECORDINGS_HEADER)
    for r in recordings:
        writer.writerow([r.id, r.user, r.channel, r.periodicity.value, r.title,
                         r.timing.start, r.timing.end, r.created_at])


def recordings_to_csv(recordings: Iterable[Recording], comment: str | None = None) -> str:
    buf = io.StringIO()
    write_recordings(buf, recordings, comment)
    return buf.getvalue()
