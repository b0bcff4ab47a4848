"""Emergency and accident reports: parsing, append-only storage, effect timeline.

The store is a JSON Lines file holding one record kind. Accepted lines are
written exactly as received, so the log doubles as the canonical copy of
each record. Ingestion is idempotent on ``alert_no`` (emergencies) and
``id`` (accidents).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .model import JunctionSpec

logger = logging.getLogger(__name__)

DEFAULT_EMERGENCY_DURATION = 60.0
DEFAULT_ACCIDENT_DURATION = 900.0
DEFAULT_CAPACITY_FACTOR = 0.5

_TIME_FORMATS = ("%b %d, %Y %I:%M:%S %p", "%Y-%m-%d %H:%M:%S")


class RecordError(ValueError):
    """A single input line that cannot become a record."""


class EmergencyKind(str, Enum):
    FIRE_BRIGADE = "Fire Brigade"
    AMBULANCE = "Ambulance"
    POLICE = "Police"

    @classmethod
    def parse(cls, text: str) -> EmergencyKind:
        # "Fire Brigade/Ambulance/Police" is the generic services label; its
        # first listed service stands for it.
        for part in str(text).split("/"):
            key = "".join(part.split()).lower()
            for kind in cls:
                if key == "".join(kind.value.split()).lower() or key == kind.name.replace("_", "").lower():
                    return kind
        raise RecordError(f"unknown emergency kind {text!r}")


class RecordKind(str, Enum):
    EMERGENCY = "emergency"
    ACCIDENT = "accident"


def parse_time(value: Any) -> float | datetime:
    """Seconds as a number, or a timestamp (ISO 8601 or ``Apr 25, 2014 3:15:34 PM``)."""
    if isinstance(value, bool):
        raise RecordError("time must be seconds or a timestamp")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise RecordError("time must be seconds or a timestamp")
    text = value.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        pass
    for fmt in _TIME_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise RecordError(f"unparseable time {value!r}")


def _coord(value: Any, name: str, bound: float) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise RecordError(f"{name} is not a number") from None
    if not -bound <= x <= bound:
        raise RecordError(f"{name} {x} outside [-{bound:g}, {bound:g}]")
    return x


def _int(value: Any, name: str) -> int:
    if isinstance(value, bool):
        raise RecordError(f"{name} must be an integer")
    try:
        x = int(value)
    except (TypeError, ValueError):
        raise RecordError(f"{name} must be an integer") from None
    if isinstance(value, float) and x != value:
        raise RecordError(f"{name} must be an integer")
    return x


def _require(obj: Mapping[str, Any], *names: str) -> None:
    missing = [n for n in names if n not in obj]
    if missing:
        raise RecordError(f"missing field(s): {', '.join(missing)}")


@dataclass(frozen=True)
class EmergencyReport:
    name: str
    email: str
    lat: float
    lng: float
    kind: EmergencyKind
    alert_no: int
    time: float | datetime
    signal: int
    feedback: str | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)
    raw: str = ""

    @property
    def key(self) -> tuple[str, int]:
        return (RecordKind.EMERGENCY.value, self.alert_no)

    @classmethod
    def from_obj(cls, obj: Mapping[str, Any], raw: str = "", n_approaches: int | None = None):
        obj = dict(obj)
        # column names as they appear in the exported report table
        if "kind" not in obj and "accident" in obj:
            obj["kind"] = obj.pop("accident")
        if "alert_no" not in obj and "alertno" in obj:
            obj["alert_no"] = obj.pop("alertno")
        if "lng" not in obj and isinstance(obj.get("lat"), str) and "," in obj["lat"]:
            obj["lat"], obj["lng"] = (p.strip() for p in obj["lat"].split(",", 1))
        _require(obj, "name", "email", "lat", "lng", "kind", "alert_no", "time", "signal")

        alert_no = _int(obj.pop("alert_no"), "alert_no")
        if alert_no < 1:
            raise RecordError("alert_no must be positive")
        signal = _int(obj.pop("signal"), "signal")
        if signal < 1 or (n_approaches is not None and signal > n_approaches):
            raise RecordError(f"signal out of range: {signal}")
        feedback = obj.pop("feedback", None)
        return cls(
            name=str(obj.pop("name")),
            email=str(obj.pop("email")),
            lat=_coord(obj.pop("lat"), "lat", 90),
            lng=_coord(obj.pop("lng"), "lng", 180),
            kind=EmergencyKind.parse(obj.pop("kind")),
            alert_no=alert_no,
            time=parse_time(obj.pop("time")),
            signal=signal,
            feedback=None if feedback in (None, "") else str(feedback),
            extra=obj,
            raw=raw,
        )


@dataclass(frozen=True)
class AccidentRecord:
    id: int
    name: str
    address: str
    lat: float
    lng: float
    type: int
    extra: Mapping[str, Any] = field(default_factory=dict)
    raw: str = ""

    @property
    def key(self) -> tuple[str, int]:
        return (RecordKind.ACCIDENT.value, self.id)

    @classmethod
    def from_obj(cls, obj: Mapping[str, Any], raw: str = "", n_approaches: int | None = None):
        obj = dict(obj)
        _require(obj, "id", "name", "address", "lat", "lng", "type")
        return cls(
            id=_int(obj.pop("id"), "id"),
            name=str(obj.pop("name")),
            address=str(obj.pop("address")),
            lat=_coord(obj.pop("lat"), "lat", 90),
            lng=_coord(obj.pop("lng"), "lng", 180),
            type=_int(obj.pop("type"), "type"),
            extra=obj,
            raw=raw,
        )


_RECORD_TYPES = {RecordKind.EMERGENCY: EmergencyReport, RecordKind.ACCIDENT: AccidentRecord}


def parse_line(line: str, kind: RecordKind | str, n_approaches: int | None = None):
    """Parse one JSON Lines entry; raises RecordError with the reason."""
    raw = line.rstrip("\r\n")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise RecordError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise RecordError("record must be a JSON object")
    return _RECORD_TYPES[RecordKind(kind)].from_obj(obj, raw=raw, n_approaches=n_approaches)


@dataclass
class Rejection:
    line_no: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line_no}: {self.reason}"


@dataclass
class IngestResult:
    accepted: list = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)
    duplicates: int = 0


class EventStore:
    """Append-only JSON Lines log of one record kind.

    One writer at a time. Readers may run alongside it: a trailing line
    without its newline is a write in progress and is not returned.
    """

    def __init__(self, path: str | os.PathLike, kind: RecordKind | str):
        self.path = Path(path)
        self.kind = RecordKind(kind)

    def raw_lines(self) -> list[str]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8", newline="") as f:
            data = f.read()
        lines = data.split("\n")
        # last element is "" after a final newline, or a partial write
        return [ln for ln in lines[:-1] if ln.strip()]

    def records(self) -> list:
        out = []
        for line_no, line in enumerate(self.raw_lines(), start=1):
            try:
                out.append(parse_line(line, self.kind))
            except RecordError as exc:
                logger.warning("%s line %d unreadable: %s", self.path, line_no, exc)
        return out

    def keys(self) -> set[tuple[str, int]]:
        return {r.key for r in self.records()}

    def ingest(self, lines: Iterable[str], n_approaches: int | None = None) -> IngestResult:
        known = self.keys()
        result = IngestResult()
        fresh: list = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = parse_line(line, self.kind, n_approaches)
            except RecordError as exc:
                result.rejected.append(Rejection(line_no, str(exc)))
                continue
            if record.key in known:
                result.duplicates += 1
                continue
            known.add(record.key)
            fresh.append(record)

        if fresh:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="") as f:
                for record in fresh:
                    f.write(record.raw + "\n")
                    f.flush()
        result.accepted = fresh
        return result


def ingest(
    stream: Iterable[str],
    kind: RecordKind | str,
    store: EventStore | str | os.PathLike,
    n_approaches: int | None = None,
) -> IngestResult:
    if not isinstance(store, EventStore):
        store = EventStore(store, kind)
    elif store.kind is not RecordKind(kind):
        raise ValueError(f"store holds {store.kind.value} records, not {kind}")
    return store.ingest(stream, n_approaches)


@dataclass(frozen=True, order=True)
class TimelineEntry:
    start: float
    rank: int  # emergencies (0) sort before accidents (1) at equal start
    approach: int
    duration: float
    factor: float = 1.0

    @property
    def is_emergency(self) -> bool:
        return self.rank == 0

    @property
    def end(self) -> float:
        return self.start + self.duration

    def to_dict(self) -> dict:
        d = {
            "type": "emergency" if self.is_emergency else "accident",
            "approach": self.approach,
            "start": self.start,
            "duration": self.duration,
        }
        if not self.is_emergency:
            d["factor"] = self.factor
        return d


def emergency_entry(approach: int, start: float, duration: float) -> TimelineEntry:
    if not duration > 0:
        raise ValueError("duration must be > 0")
    return TimelineEntry(float(start), 0, approach, float(duration))


def accident_entry(approach: int, start: float, duration: float, factor: float) -> TimelineEntry:
    if not duration > 0:
        raise ValueError("duration must be > 0")
    if not 0 < factor <= 1:
        raise ValueError("capacity factor must lie in (0, 1]")
    return TimelineEntry(float(start), 1, approach, float(duration), float(factor))


@dataclass(frozen=True)
class EventTimeline:
    entries: tuple[TimelineEntry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(sorted(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]


@dataclass(frozen=True)
class AccidentBinding:
    approach: int
    start: float


@dataclass(frozen=True)
class EffectDefaults:
    emergency_duration: float = DEFAULT_EMERGENCY_DURATION
    accident_duration: float = DEFAULT_ACCIDENT_DURATION
    capacity_factor: float = DEFAULT_CAPACITY_FACTOR
    severity_factors: Mapping[int, float] = field(default_factory=dict)

    def factor_for(self, severity: int) -> float:
        return self.severity_factors.get(severity, self.capacity_factor)

    def to_dict(self) -> dict:
        return {
            "emergency_duration": self.emergency_duration,
            "accident_duration": self.accident_duration,
            "capacity_factor": self.capacity_factor,
            "severity_factors": {str(k): v for k, v in sorted(self.severity_factors.items())},
        }


def build_timeline(
    records: Sequence[EmergencyReport | AccidentRecord],
    junction: JunctionSpec,
    bindings: Mapping[int, AccidentBinding] | None = None,
    defaults: EffectDefaults | None = None,
    origin: datetime | None = None,
) -> tuple[EventTimeline, list[str]]:
    """Turn records into simulator effects.

    Emergency timestamps given as dates are measured from ``origin``, which
    defaults to the earliest dated emergency. Accidents carry no time or
    approach of their own and need an entry in ``bindings`` keyed by id.
    Returns the timeline and a list of per-record rejection messages.
    """
    bindings = bindings or {}
    defaults = defaults or EffectDefaults()
    n = junction.n_approaches
    dated = [r.time for r in records if isinstance(r, EmergencyReport) and isinstance(r.time, datetime)]
    if origin is None and dated:
        origin = min(dated, key=_utc)

    entries: list[TimelineEntry] = []
    problems: list[str] = []
    for r in records:
        if isinstance(r, EmergencyReport):
            if not 1 <= r.signal <= n:
                problems.append(f"emergency {r.alert_no}: signal out of range: {r.signal}")
                continue
            start = r.time if isinstance(r.time, float) else (_utc(r.time) - _utc(origin)).total_seconds()
            entries.append(emergency_entry(r.signal, start, defaults.emergency_duration))
        else:
            binding = bindings.get(r.id)
            if binding is None:
                problems.append(f"accident {r.id}: no approach binding")
                continue
            if not 1 <= binding.approach <= n:
                problems.append(f"accident {r.id}: bound approach out of range: {binding.approach}")
                continue
            entries.append(
                accident_entry(
                    binding.approach, binding.start, defaults.accident_duration, defaults.factor_for(r.type)
                )
            )
    return EventTimeline(tuple(entries)), problems


def _utc(t: datetime) -> datetime:
    return t if t.tzinfo is not None else t.replace(tzinfo=timezone.utc)


def active_effects(
    timeline: EventTimeline | None, start: float, end: float
) -> tuple[tuple[int, ...], dict[int, float]]:
    """Emergency approaches and accident capacity factors overlapping [start, end).

    Overlapping accidents on one approach compose by multiplication. A
    zero-length window selects entries active at ``start``.
    """
    if end < start:
        raise ValueError("window end precedes start")
    emergencies: set[int] = set()
    factors: dict[int, float] = {}
    if timeline is None:
        return (), factors
    point = end == start
    for e in timeline.entries:
        if e.start > start if point else e.start >= end:
            break  # entries are sorted by start
        if e.end <= start:
            continue
        if e.is_emergency:
            emergencies.add(e.approach)
        else:
            factors[e.approach] = factors.get(e.approach, 1.0) * e.factor
    return tuple(sorted(emergencies)), factors
