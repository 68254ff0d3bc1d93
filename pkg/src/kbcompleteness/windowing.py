"""Turn an edit stream into per-window capture incidence.

The observation period is cut into fixed-width windows aligned to the period
start. An entity is *captured* in a window when its article received at
least one edit inside it; how many edits does not matter.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone

import numpy as np

from .dataset import EditRecord, EntityRegistry, GenderLabel
from .validation import check_window_days

ALL = "all"

_DAY = 86400


@dataclass(frozen=True)
class WindowSpec:
    period_start: datetime
    period_end: datetime
    width_days: int = 7

    def __post_init__(self):
        check_window_days(self.width_days)
        if self.period_start.tzinfo is None or self.period_end.tzinfo is None:
            raise ValueError("period bounds must be timezone-aware")
        if not self.period_start < self.period_end:
            raise ValueError("period_start must precede period_end")

    @classmethod
    def from_dates(cls, first_day: date, last_day: date, width_days: int = 7) -> "WindowSpec":
        """Period covering whole days ``first_day`` .. ``last_day`` inclusive."""
        start = datetime.combine(first_day, time(0), tzinfo=timezone.utc)
        end = datetime.combine(last_day + timedelta(days=1), time(0), tzinfo=timezone.utc)
        return cls(start, end, width_days)

    @property
    def period_seconds(self) -> int:
        return int((self.period_end - self.period_start).total_seconds())

    @property
    def n_windows(self) -> int:
        w = self.width_days * _DAY
        return -(-self.period_seconds // w)

    @property
    def truncated(self) -> bool:
        """True when the final window is shorter than ``width_days``."""
        return self.period_seconds % (self.width_days * _DAY) != 0

    def window_of(self, ts: datetime) -> int | None:
        """Zero-based window index of ``ts``, or ``None`` outside the period."""
        if ts < self.period_start or ts >= self.period_end:
            return None
        return int((ts - self.period_start).total_seconds()) // (self.width_days * _DAY)

    def with_width(self, width_days: int) -> "WindowSpec":
        return WindowSpec(self.period_start, self.period_end, width_days)


def make_windows(spec: WindowSpec) -> list[tuple[datetime, datetime]]:
    """Consecutive half-open windows ``[start, end)`` covering the period.

    The last window is cut at ``period_end`` and may be shorter than the
    others.
    """
    width = timedelta(days=spec.width_days)
    out = []
    start = spec.period_start
    while start < spec.period_end:
        end = min(start + width, spec.period_end)
        out.append((start, end))
        start = end
    return out


@dataclass(frozen=True)
class Stratum:
    class_id: str
    gender: str = ALL

    def __post_init__(self):
        g = self.gender.value if isinstance(self.gender, GenderLabel) else self.gender
        if g != ALL and g not in {x.value for x in GenderLabel}:
            raise ValueError(f"unknown gender stratum {g!r}")
        object.__setattr__(self, "gender", g)

    def matches(self, class_ids: Iterable[str], gender: GenderLabel | str) -> bool:
        if self.class_id not in class_ids:
            return False
        return self.gender == ALL or self.gender == (gender.value if isinstance(gender, GenderLabel) else gender)

    def __str__(self) -> str:
        return f"{self.class_id}/{self.gender}"


@dataclass(frozen=True)
class IncidenceSummary:
    """Which entities were captured in which window, for one stratum."""

    stratum: Stratum
    capture_sets: tuple[frozenset, ...]
    D: int
    n: int
    dropped: int = 0
    window_ends: tuple[datetime, ...] | None = field(default=None, compare=False)

    @classmethod
    def from_capture_sets(cls, stratum: Stratum, capture_sets: Sequence[Iterable], dropped: int = 0, window_ends=None) -> "IncidenceSummary":
        sets = tuple(frozenset(s) for s in capture_sets)
        union = frozenset().union(*sets) if sets else frozenset()
        return cls(stratum, sets, len(union), sum(len(s) for s in sets), dropped,
                   tuple(window_ends) if window_ends is not None else None)

    @property
    def K(self) -> int:
        return len(self.capture_sets)

    def capture_counts(self) -> dict:
        """Entity -> number of windows in which it was captured."""
        counts: dict = {}
        for s in self.capture_sets:
            for e in s:
                counts[e] = counts.get(e, 0) + 1
        return counts

    def to_matrix(self) -> tuple[list, np.ndarray]:
        """Observed entities (sorted) and their 0/1 entities-by-windows matrix."""
        entities = sorted(self.capture_counts())
        row = {e: i for i, e in enumerate(entities)}
        X = np.zeros((len(entities), self.K), dtype=np.int8)
        for w, s in enumerate(self.capture_sets):
            for e in s:
                X[row[e], w] = 1
        return entities, X

    def check(self) -> None:
        union = frozenset().union(*self.capture_sets) if self.capture_sets else frozenset()
        if self.D != len(union):
            raise ValueError(f"D={self.D} but {len(union)} distinct entities captured")
        if self.n != sum(len(s) for s in self.capture_sets):
            raise ValueError("n does not equal the total number of incidences")


@dataclass
class _Binned:
    # per event that falls inside the period: (entity_id, window index)
    hits: list[tuple[str, int]]
    dropped: int


def _assign_windows(events: Iterable[EditRecord], spec: WindowSpec) -> _Binned:
    start = spec.period_start
    total = spec.period_seconds
    w = spec.width_days * _DAY
    hits = []
    dropped = 0
    for ev in events:
        offset = int((ev.timestamp - start).total_seconds())
        if offset < 0 or offset >= total:
            dropped += 1
            continue
        hits.append((ev.entity_id, offset // w))
    return _Binned(hits, dropped)


def _check_stratum(registry: EntityRegistry, stratum: Stratum) -> None:
    if stratum.class_id not in set(registry.class_ids()):
        raise KeyError(f"class {stratum.class_id!r} is not present in the registry")


def _bin_from_hits(binned: _Binned, registry: EntityRegistry, spec: WindowSpec, stratum: Stratum) -> IncidenceSummary:
    K = spec.n_windows
    sets: list[set] = [set() for _ in range(K)]
    member: dict[str, bool] = {}
    for entity_id, w in binned.hits:
        ok = member.get(entity_id)
        if ok is None:
            entry = registry.get(entity_id)
            ok = entry is not None and stratum.matches(entry.class_ids, entry.gender)
            member[entity_id] = ok
        if ok:
            sets[w].add(entity_id)
    ends = tuple(end for _, end in make_windows(spec))
    return IncidenceSummary.from_capture_sets(stratum, sets, binned.dropped, ends)


def bin_incidence(events: Iterable[EditRecord], registry: EntityRegistry, spec: WindowSpec, stratum: Stratum) -> IncidenceSummary:
    """Capture sets of one stratum over the windows of ``spec``.

    Events outside the period are not assigned and are counted in
    ``dropped``. Events of entities outside the stratum are ignored.
    """
    _check_stratum(registry, stratum)
    return _bin_from_hits(_assign_windows(events, spec), registry, spec, stratum)


def bin_strata(events: Iterable[EditRecord], registry: EntityRegistry, spec: WindowSpec, strata: Sequence[Stratum]) -> dict[Stratum, IncidenceSummary]:
    """Like :func:`bin_incidence` for several strata, with a single pass over the events."""
    for s in strata:
        _check_stratum(registry, s)
    binned = _assign_windows(events, spec)
    return {s: _bin_from_hits(binned, registry, spec, s) for s in strata}


def prefix_summaries(full: IncidenceSummary) -> list[IncidenceSummary]:
    """Summaries restricted to windows ``1..t`` for every ``t``."""
    out = []
    seen: set = set()
    n = 0
    for t, s in enumerate(full.capture_sets, start=1):
        seen |= s
        n += len(s)
        ends = full.window_ends[:t] if full.window_ends is not None else None
        out.append(IncidenceSummary(full.stratum, full.capture_sets[:t], len(seen), n, full.dropped, ends))
    return out


def cumulative_summaries(events: Iterable[EditRecord], registry: EntityRegistry, spec: WindowSpec, stratum: Stratum) -> list[IncidenceSummary]:
    """Incidence accumulated window by window; the last element equals :func:`bin_incidence`."""
    return prefix_summaries(bin_incidence(events, registry, spec, stratum))
