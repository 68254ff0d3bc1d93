"""On-disk data model: edit records, the entity registry and name dictionaries.

Edit records and registry entries are stored as NDJSON, one object per line::

    {"entity":"Samantha_Cristoforetti","ts":"2021-03-05T12:00:00Z","rev":1001,"classes":["Astronaut"]}
    {"entity":"Samantha_Cristoforetti","label":"Samantha Cristoforetti","classes":["Astronaut"],"gender":"female"}

Name dictionaries are CSV files with the header ``name,p_female``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import IO, Union

logger = logging.getLogger(__name__)

Source = Union[IO[bytes], IO[str], Iterable[bytes], Iterable[str]]

_TS_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(Z|[+-]\d{2}:\d{2})$")


class DatasetError(ValueError):
    """A record could not be parsed or violates a dataset invariant."""

    def __init__(self, message: str, *, lineno: int | None = None, field: str | None = None):
        self.lineno = lineno
        self.field = field
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


class GenderLabel(str, enum.Enum):
    FEMALE = "female"
    MALE = "male"
    UNDEFINED = "undefined"

    def __str__(self) -> str:
        return self.value


def parse_timestamp(text: str) -> datetime:
    """Parse a second-precision ISO-8601 UTC timestamp (``Z`` or ``+00:00``)."""
    if not isinstance(text, str):
        raise ValueError(f"timestamp must be text, got {type(text).__name__}")
    m = _TS_RE.match(text)
    if m is None:
        raise ValueError(f"not a second-precision ISO-8601 timestamp: {text!r}")
    if m.group(7) not in ("Z", "+00:00", "-00:00"):
        raise ValueError(f"timestamp is not UTC: {text!r}")
    y, mo, d, h, mi, s = (int(g) for g in m.groups()[:6])
    return datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _check_entity_id(entity_id: object) -> str:
    if not isinstance(entity_id, str) or not entity_id:
        raise ValueError("empty entity_id")
    if "\n" in entity_id or "\r" in entity_id:
        raise ValueError("entity_id contains a newline")
    return entity_id


def _check_classes(classes: object) -> tuple[str, ...]:
    if not isinstance(classes, (list, tuple)):
        raise ValueError("classes must be a list")
    if not classes:
        raise ValueError("empty class list")
    for c in classes:
        if not isinstance(c, str) or not c:
            raise ValueError(f"invalid class identifier {c!r}")
    return tuple(classes)


@dataclass(frozen=True)
class EditRecord:
    """One capture event: an edit of an entity's article."""

    entity_id: str
    timestamp: datetime
    revision_id: int
    class_ids: tuple[str, ...]

    def __post_init__(self):
        _check_entity_id(self.entity_id)
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware UTC")
        if isinstance(self.revision_id, bool) or not isinstance(self.revision_id, int) or self.revision_id < 0:
            raise ValueError(f"revision id must be a non-negative integer, got {self.revision_id!r}")
        object.__setattr__(self, "class_ids", _check_classes(list(self.class_ids)))

    @property
    def sort_key(self) -> tuple[datetime, int]:
        return (self.timestamp, self.revision_id)


_EDIT_FIELDS = ("entity", "ts", "rev", "classes")


def _load_json_object(line: str, lineno: int | None) -> dict:
    if "\n" in line.rstrip("\n"):
        raise DatasetError("record spans multiple lines", lineno=lineno)
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed JSON: {exc.msg}", lineno=lineno) from None
    if not isinstance(obj, dict):
        raise DatasetError("record is not a JSON object", lineno=lineno)
    return obj


def parse_edit_record(line: str, lineno: int | None = None) -> EditRecord:
    obj = _load_json_object(line, lineno)
    for name in _EDIT_FIELDS:
        if name not in obj:
            raise DatasetError(f"missing field {name!r}", lineno=lineno, field=name)
    extra = set(obj) - set(_EDIT_FIELDS)
    if extra:
        raise DatasetError(f"unexpected fields {sorted(extra)}", lineno=lineno, field=sorted(extra)[0])
    try:
        entity = _check_entity_id(obj["entity"])
    except ValueError as exc:
        raise DatasetError(str(exc), lineno=lineno, field="entity") from None
    try:
        ts = parse_timestamp(obj["ts"])
    except ValueError as exc:
        raise DatasetError(str(exc), lineno=lineno, field="ts") from None
    rev = obj["rev"]
    if isinstance(rev, bool) or not isinstance(rev, int) or rev < 0:
        raise DatasetError(f"revision id must be a non-negative integer, got {rev!r}", lineno=lineno, field="rev")
    try:
        classes = _check_classes(obj["classes"])
    except ValueError as exc:
        raise DatasetError(str(exc), lineno=lineno, field="classes") from None
    return EditRecord(entity, ts, rev, classes)


def serialize_edit_record(record: EditRecord) -> str:
    """Canonical single-line form; inverse of :func:`parse_edit_record`."""
    return json.dumps(
        {
            "entity": record.entity_id,
            "ts": format_timestamp(record.timestamp),
            "rev": record.revision_id,
            "classes": list(record.class_ids),
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def _iter_lines(source: Source) -> Iterator[tuple[int, str]]:
    """Yield ``(lineno, text)`` for non-blank lines, decoding bytes as UTF-8."""
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DatasetError(f"invalid UTF-8: {exc.reason}", lineno=lineno) from None
        line = raw.rstrip("\r\n")
        if line.strip():
            yield lineno, line


@dataclass
class EditLog:
    """Edit records loaded from one source, after revision de-duplication."""

    records: list[EditRecord]
    duplicates: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def load_edits(source: Source) -> EditLog:
    """Read NDJSON edit records.

    A revision id that appears twice for the same entity (API paging can
    re-deliver a page) is kept once; the number of dropped copies is
    reported in :attr:`EditLog.duplicates`.
    """
    records = []
    seen: set[tuple[str, int]] = set()
    duplicates = 0
    for lineno, line in _iter_lines(source):
        rec = parse_edit_record(line, lineno)
        key = (rec.entity_id, rec.revision_id)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        records.append(rec)
    if duplicates:
        logger.warning("dropped %d duplicate revision(s)", duplicates)
    return EditLog(records, duplicates)


def sort_edits(records: Iterable[EditRecord]) -> list[EditRecord]:
    """Deterministic dataset order: by entity, then (timestamp, revision id)."""
    return sorted(records, key=lambda r: (r.entity_id, r.timestamp, r.revision_id))


def merge_edits(existing: Iterable[EditRecord], new: Iterable[EditRecord]) -> list[EditRecord]:
    """Union of two record sets keyed by (entity_id, revision_id); existing copies win."""
    merged: dict[tuple[str, int], EditRecord] = {}
    for rec in existing:
        merged.setdefault((rec.entity_id, rec.revision_id), rec)
    for rec in new:
        merged.setdefault((rec.entity_id, rec.revision_id), rec)
    return sort_edits(merged.values())


def write_edits(records: Iterable[EditRecord], sink: IO[str]) -> int:
    count = 0
    for rec in records:
        sink.write(serialize_edit_record(rec) + "\n")
        count += 1
    return count


@dataclass(frozen=True)
class RegistryEntry:
    entity_id: str
    label: str
    class_ids: tuple[str, ...]
    gender: GenderLabel = GenderLabel.UNDEFINED


_REGISTRY_FIELDS = ("entity", "label", "classes", "gender")


def parse_registry_entry(line: str, lineno: int | None = None) -> RegistryEntry:
    obj = _load_json_object(line, lineno)
    for name in ("entity", "label", "classes"):
        if name not in obj:
            raise DatasetError(f"missing field {name!r}", lineno=lineno, field=name)
    extra = set(obj) - set(_REGISTRY_FIELDS)
    if extra:
        raise DatasetError(f"unexpected fields {sorted(extra)}", lineno=lineno, field=sorted(extra)[0])
    try:
        entity = _check_entity_id(obj["entity"])
    except ValueError as exc:
        raise DatasetError(str(exc), lineno=lineno, field="entity") from None
    label = obj["label"]
    if not isinstance(label, str):
        raise DatasetError("label must be text", lineno=lineno, field="label")
    try:
        classes = _check_classes(obj["classes"])
    except ValueError as exc:
        raise DatasetError(str(exc), lineno=lineno, field="classes") from None
    # an unclassified registry (fresh from ingestion) may omit the gender field
    gender = obj.get("gender", GenderLabel.UNDEFINED.value)
    try:
        gender = GenderLabel(gender)
    except ValueError:
        raise DatasetError(f"unknown gender label {gender!r}", lineno=lineno, field="gender") from None
    return RegistryEntry(entity, label, classes, gender)


def serialize_registry_entry(entry: RegistryEntry) -> str:
    return json.dumps(
        {
            "entity": entry.entity_id,
            "label": entry.label,
            "classes": list(entry.class_ids),
            "gender": entry.gender.value,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


@dataclass
class EntityRegistry(Mapping):
    """The observed population, keyed by entity id."""

    entries: dict[str, RegistryEntry] = field(default_factory=dict)

    def __getitem__(self, entity_id: str) -> RegistryEntry:
        return self.entries[entity_id]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_entries(cls, entries: Iterable[RegistryEntry]) -> "EntityRegistry":
        reg: dict[str, RegistryEntry] = {}
        for e in entries:
            if e.entity_id in reg:
                raise DatasetError(f"duplicate entity id {e.entity_id!r}")
            reg[e.entity_id] = e
        return cls(reg)

    def class_ids(self) -> list[str]:
        return sorted({c for e in self.entries.values() for c in e.class_ids})

    def members(self, class_id: str) -> list[RegistryEntry]:
        return [e for e in self.entries.values() if class_id in e.class_ids]

    def with_genders(self, genders: Mapping[str, GenderLabel]) -> "EntityRegistry":
        return EntityRegistry(
            {k: replace(e, gender=genders.get(k, e.gender)) for k, e in self.entries.items()}
        )


def load_registry(source: Source) -> EntityRegistry:
    entries: dict[str, RegistryEntry] = {}
    first_line: dict[str, int] = {}
    for lineno, line in _iter_lines(source):
        entry = parse_registry_entry(line, lineno)
        if entry.entity_id in entries:
            raise DatasetError(
                f"duplicate entity id {entry.entity_id!r} (lines {first_line[entry.entity_id]} and {lineno})",
                lineno=lineno,
                field="entity",
            )
        entries[entry.entity_id] = entry
        first_line[entry.entity_id] = lineno
    return EntityRegistry(entries)


def write_registry(registry: EntityRegistry, sink: IO[str]) -> int:
    for entity_id in sorted(registry):
        sink.write(serialize_registry_entry(registry[entity_id]) + "\n")
    return len(registry)


def validate_dataset(registry: EntityRegistry, records: Iterable[EditRecord]) -> None:
    """Check that every class referenced by an edit is known to the registry."""
    known = set(registry.class_ids())
    unknown: dict[str, int] = {}
    for rec in records:
        for c in rec.class_ids:
            if c not in known:
                unknown[c] = unknown.get(c, 0) + 1
    if unknown:
        listed = ", ".join(f"{c} ({n} edits)" for c, n in sorted(unknown.items()))
        raise DatasetError(f"edit records reference classes absent from the registry: {listed}")


class NameDictionary(Mapping):
    """Normalised given name -> probability that the name belongs to a woman."""

    def __init__(self, probabilities: Mapping[str, float] | None = None):
        self._p: dict[str, float] = {}
        for name, p in (probabilities or {}).items():
            self._p[name] = _check_probability(p)

    def __getitem__(self, name_key: str) -> float:
        return self._p[name_key]

    def __iter__(self):
        return iter(self._p)

    def __len__(self):
        return len(self._p)

    def lookup(self, name_key: str) -> float | None:
        return self._p.get(name_key)

    def __repr__(self):
        return f"NameDictionary({len(self)} names)"


def _check_probability(p: object) -> float:
    p = float(p)
    if math.isnan(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range [0, 1]: {p}")
    return p


def load_name_dictionary(source: Source) -> NameDictionary:
    lines = (text for _, text in _iter_lines_keep_numbers(source))
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("missing header 'name,p_female'", lineno=1) from None
    if [h.strip() for h in header] != ["name", "p_female"]:
        raise DatasetError(f"missing header 'name,p_female', got {','.join(header)!r}", lineno=1)
    probs: dict[str, float] = {}
    first_line: dict[str, int] = {}
    for row in reader:
        lineno = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise DatasetError(f"expected 2 columns, got {len(row)}", lineno=lineno)
        name, raw_p = row[0], row[1].strip()
        if not name:
            raise DatasetError("empty name", lineno=lineno, field="name")
        try:
            p = _check_probability(raw_p)
        except ValueError as exc:
            msg = str(exc) if "range" in str(exc) else f"not a number: {raw_p!r}"
            raise DatasetError(msg, lineno=lineno, field="p_female") from None
        if name in probs:
            raise DatasetError(
                f"duplicate name {name!r} (lines {first_line[name]} and {lineno})", lineno=lineno, field="name"
            )
        probs[name] = p
        first_line[name] = lineno
    return NameDictionary(probs)


def _iter_lines_keep_numbers(source: Source) -> Iterator[tuple[int, str]]:
    # blank lines are kept so csv line numbers match the file
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DatasetError(f"invalid UTF-8: {exc.reason}", lineno=lineno) from None
        if lineno == 1:
            raw = raw.lstrip("\ufeff")
        yield lineno, raw.rstrip("\r\n")


def write_name_dictionary(dictionary: Mapping[str, float], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["name", "p_female"])
    for name in sorted(dictionary):
        writer.writerow([name, repr(float(dictionary[name]))])


def open_text(path, mode: str = "r") -> IO[str]:
    return io.open(path, mode, encoding="utf-8", newline="\n" if "w" in mode or "a" in mode else None)
