"""Junction geometry, flow ranges, live approach state and traffic-level presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Any, Iterable, Sequence

MIN_APPROACHES = 3
MAX_APPROACHES = 8


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


class TrafficLevel(IntEnum):
    """Coarse traffic condition. Ordered: LOW < MEDIUM < HIGH."""

    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @classmethod
    def parse(cls, value: str | TrafficLevel) -> TrafficLevel:
        if isinstance(value, TrafficLevel):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown traffic level {value!r}") from None

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class FlowRange:
    """Vehicle count range per reference interval."""

    low: int
    high: int

    def scaled(self, factor: float) -> FlowRange:
        return FlowRange(round_half_up(self.low * factor), round_half_up(self.high * factor))

    def to_list(self) -> list[int]:
        return [self.low, self.high]

    @classmethod
    def from_list(cls, pair: Sequence[int]) -> FlowRange:
        low, high = pair
        return cls(int(low), int(high))


@dataclass(frozen=True)
class ApproachSpec:
    id: int
    inflow: FlowRange
    outflow_red: FlowRange
    outflow_green: FlowRange
    lanes: int = 2
    popularity: float = 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "lanes": self.lanes,
            "popularity": self.popularity,
            "inflow": self.inflow.to_list(),
            "outflow_red": self.outflow_red.to_list(),
            "outflow_green": self.outflow_green.to_list(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ApproachSpec:
        return cls(
            id=int(data["id"]),
            lanes=int(data.get("lanes", 2)),
            popularity=float(data.get("popularity", 1.0)),
            inflow=FlowRange.from_list(data["inflow"]),
            outflow_red=FlowRange.from_list(data["outflow_red"]),
            outflow_green=FlowRange.from_list(data["outflow_green"]),
        )


@dataclass(frozen=True)
class JunctionSpec:
    """Static junction description: approaches 1..N plus timing basis.

    Flow ranges of every approach are counts per ``reference_interval``
    seconds. ``clearance`` is the all-red gap inserted after each phase.
    """

    approaches: tuple[ApproachSpec, ...]
    reference_interval: float = 30.0
    clearance: float = 4.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "approaches", tuple(self.approaches))

    @property
    def n_approaches(self) -> int:
        return len(self.approaches)

    def approach(self, approach_id: int) -> ApproachSpec:
        return self.approaches[approach_id - 1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "reference_interval": self.reference_interval,
            "clearance": self.clearance,
            "approaches": [a.to_dict() for a in self.approaches],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> JunctionSpec:
        return cls(
            approaches=tuple(ApproachSpec.from_dict(a) for a in data["approaches"]),
            reference_interval=float(data.get("reference_interval", 30.0)),
            clearance=float(data.get("clearance", 4.0)),
        )


@dataclass(frozen=True)
class ApproachState:
    """Live state of one approach.

    ``queue`` holds arrival timestamps of waiting vehicles, oldest first.
    ``red_duration`` counts seconds since the approach last had full green,
    ``cycles_waited`` the phases since then.
    """

    queue: tuple[float, ...] = ()
    red_duration: float = 0.0
    cycles_waited: int = 0

    @property
    def density(self) -> int:
        return len(self.queue)

    @classmethod
    def with_density(cls, density: int, at: float = 0.0) -> ApproachState:
        return cls(queue=(float(at),) * int(density))


def initial_states(densities: Iterable[int], at: float = 0.0) -> tuple[ApproachState, ...]:
    return tuple(ApproachState.with_density(d, at) for d in densities)


class Movement(Enum):
    LEFT = "Left"
    STRAIGHT = "Straight"
    RIGHT = "Right"


ALL_MOVEMENTS = frozenset(Movement)


@dataclass(frozen=True)
class MovementIndication:
    """Green movements per approach, indexed by approach id - 1."""

    greens: tuple[frozenset[Movement], ...]

    def __post_init__(self) -> None:
        full = sum(1 for g in self.greens if g == ALL_MOVEMENTS)
        if full > 1:
            raise ValueError("more than one approach has full green")

    @classmethod
    def for_phase(cls, n: int, chosen: int, companion: int | None) -> MovementIndication:
        greens = []
        for approach_id in range(1, n + 1):
            if approach_id == chosen:
                greens.append(ALL_MOVEMENTS)
            elif approach_id == companion:
                greens.append(frozenset({Movement.LEFT}))
            else:
                greens.append(frozenset())
        return cls(tuple(greens))

    def label(self, approach_id: int) -> str:
        g = self.greens[approach_id - 1]
        if g == ALL_MOVEMENTS:
            return "GREEN"
        if g:
            return "+".join(m.name for m in Movement if m in g)
        return "RED"


def classify_traffic_level(density: float) -> TrafficLevel:
    """Map a vehicle count to LOW (<50), MEDIUM (50..150) or HIGH (>150)."""
    if density < 0:
        raise ValueError("density must be non-negative")
    if density < 50:
        return TrafficLevel.LOW
    if density <= 150:
        return TrafficLevel.MEDIUM
    return TrafficLevel.HIGH


# (inflow, outflow_red, outflow_green) per approach for moderate traffic.
# Inflow for approaches 3 and 4 is not tabulated; approach 1's range is reused.
_MEDIUM_PRESET: tuple[tuple[FlowRange, FlowRange, FlowRange], ...] = (
    (FlowRange(3, 15), FlowRange(9, 15), FlowRange(10, 15)),
    (FlowRange(11, 15), FlowRange(11, 15), FlowRange(20, 33)),
    (FlowRange(3, 15), FlowRange(5, 13), FlowRange(22, 39)),
    (FlowRange(3, 15), FlowRange(7, 14), FlowRange(24, 44)),
)

_LEVEL_SCALE = {TrafficLevel.LOW: 0.5, TrafficLevel.MEDIUM: 1.0, TrafficLevel.HIGH: 1.5}


def preset_ranges(level: TrafficLevel | str) -> list[tuple[FlowRange, FlowRange, FlowRange]]:
    """Return ``(inflow, outflow_red, outflow_green)`` for approaches 1..4."""
    factor = _LEVEL_SCALE[TrafficLevel.parse(level)]
    if factor == 1.0:
        return list(_MEDIUM_PRESET)
    return [tuple(r.scaled(factor) for r in triple) for triple in _MEDIUM_PRESET]


def preset_junction(
    level: TrafficLevel | str = TrafficLevel.MEDIUM,
    n_approaches: int = 4,
    reference_interval: float = 30.0,
    clearance: float = 4.0,
) -> JunctionSpec:
    """Junction whose approaches take their ranges from the level preset.

    Junctions wider than four approaches reuse the preset cyclically.
    """
    triples = preset_ranges(level)
    approaches = []
    for i in range(n_approaches):
        inflow, red, green = triples[i % len(triples)]
        approaches.append(ApproachSpec(i + 1, inflow, red, green))
    return JunctionSpec(tuple(approaches), reference_interval, clearance)


@dataclass(frozen=True)
class Violation:
    approach_id: int | None
    field: str
    message: str

    def __str__(self) -> str:
        where = f"approach {self.approach_id}" if self.approach_id is not None else "junction"
        return f"{where}: {self.field}: {self.message}"


def validate(junction: JunctionSpec) -> list[Violation]:
    """Return every broken junction invariant; an empty list means valid."""
    out: list[Violation] = []
    n = junction.n_approaches
    if not MIN_APPROACHES <= n <= MAX_APPROACHES:
        out.append(
            Violation(None, "approaches", f"count {n} outside [{MIN_APPROACHES}, {MAX_APPROACHES}]")
        )
    if not junction.reference_interval > 0:
        out.append(Violation(None, "reference_interval", "must be > 0"))
    if not junction.clearance >= 0:
        out.append(Violation(None, "clearance", "must be >= 0"))

    seen: set[int] = set()
    for pos, a in enumerate(junction.approaches, start=1):
        if a.id in seen:
            out.append(Violation(a.id, "id", f"duplicate id {a.id}"))
        elif a.id != pos:
            out.append(Violation(a.id, "id", f"expected id {pos} at position {pos}"))
        seen.add(a.id)
        if a.lanes < 1:
            out.append(Violation(a.id, "lanes", "lanes < 1"))
        if not a.popularity > 0:
            out.append(Violation(a.id, "popularity", "popularity <= 0"))
        for name in ("inflow", "outflow_red", "outflow_green"):
            r: FlowRange = getattr(a, name)
            if r.low < 0 or r.high < 0:
                out.append(Violation(a.id, name, "negative count"))
            if r.low > r.high:
                out.append(Violation(a.id, name, "min > max"))
    return out


def with_approaches(junction: JunctionSpec, approaches: Sequence[ApproachSpec]) -> JunctionSpec:
    return replace(junction, approaches=tuple(approaches))


__all__ = [
    "ALL_MOVEMENTS",
    "ApproachSpec",
    "ApproachState",
    "FlowRange",
    "JunctionSpec",
    "Movement",
    "MovementIndication",
    "TrafficLevel",
    "Violation",
    "classify_traffic_level",
    "initial_states",
    "preset_junction",
    "preset_ranges",
    "round_half_up",
    "validate",
    "with_approaches",
]
