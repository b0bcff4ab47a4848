"""JSON scenario documents: schema, parsing with path-qualified errors, serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

import jsonschema

from .controller import ControllerParams, StaticSchedule
from .events import (
    AccidentBinding,
    EffectDefaults,
    EventStore,
    EventTimeline,
    RecordKind,
    build_timeline,
)
from .model import (
    ApproachSpec,
    FlowRange,
    JunctionSpec,
    TrafficLevel,
    classify_traffic_level,
    preset_ranges,
    validate,
)
from .sim import Sampler, SimConfig


class ScenarioError(ValueError):
    """Malformed document: bad JSON or a schema violation (CLI exit code 2)."""


class ScenarioInvalid(ValueError):
    """Well-formed document describing an invalid junction or parameters (exit code 1)."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


_range = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_number = {"type": "number"}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["densities"],
    "properties": {
        "junction": {
            "type": "object",
            "additionalProperties": False,
            "required": ["approaches"],
            "properties": {
                "reference_interval": _number,
                "clearance": _number,
                "approaches": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id"],
                        "properties": {
                            "id": {"type": "integer"},
                            "lanes": {"type": "integer"},
                            "popularity": _number,
                            "inflow": _range,
                            "outflow_red": _range,
                            "outflow_green": _range,
                        },
                    },
                },
            },
        },
        "level": {"enum": ["Low", "Medium", "High", "low", "medium", "high"]},
        "densities": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "controller": {"enum": ["dynamic", "static"]},
        "dynamic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{name: _number for name in ("alpha", "g_min", "g_max", "t_starve", "emergency_green", "lane_reference")},
                "lookahead": {"type": "boolean"},
            },
        },
        "static": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "order": {"type": "array", "items": {"type": "integer"}},
                "splits": {"type": "array", "items": _number},
                "cycle": _number,
            },
        },
        "timeline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "emergencies": {"type": "string"},
                "accidents": {"type": "string"},
                "accident_bindings": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["approach", "start"],
                        "properties": {"approach": {"type": "integer"}, "start": _number},
                    },
                },
                "emergency_duration": _number,
                "accident_duration": _number,
                "capacity_factor": _number,
                "severity_factors": {"type": "object", "additionalProperties": _number},
                "origin": {"type": "string"},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": _number,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "sampler": {"enum": ["midpoint", "uniform", "Midpoint", "UniformRandom"]},
            },
        },
    },
}

_RANGE_KEYS = ("inflow", "outflow_red", "outflow_green")


@dataclass(frozen=True)
class TimelineSource:
    emergencies: str | None = None
    accidents: str | None = None
    bindings: dict[int, AccidentBinding] = field(default_factory=dict)
    defaults: EffectDefaults = field(default_factory=EffectDefaults)
    origin: str | None = None

    def load(self, junction: JunctionSpec, base: Path | None = None) -> tuple[EventTimeline, list[str]]:
        base = base or Path(".")
        records: list = []
        for path, kind in ((self.emergencies, RecordKind.EMERGENCY), (self.accidents, RecordKind.ACCIDENT)):
            if path:
                records.extend(EventStore(base / path, kind).records())
        origin = datetime.fromisoformat(self.origin) if self.origin else None
        return build_timeline(records, junction, self.bindings, self.defaults, origin)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.emergencies:
            out["emergencies"] = self.emergencies
        if self.accidents:
            out["accidents"] = self.accidents
        if self.bindings:
            out["accident_bindings"] = {
                str(k): {"approach": b.approach, "start": b.start} for k, b in sorted(self.bindings.items())
            }
        d = self.defaults
        out.update(
            emergency_duration=d.emergency_duration,
            accident_duration=d.accident_duration,
            capacity_factor=d.capacity_factor,
        )
        if d.severity_factors:
            out["severity_factors"] = {str(k): v for k, v in sorted(d.severity_factors.items())}
        if self.origin:
            out["origin"] = self.origin
        return out


@dataclass(frozen=True)
class Scenario:
    junction: JunctionSpec
    densities: tuple[int, ...]
    controller: str = "dynamic"
    params: ControllerParams = field(default_factory=ControllerParams)
    schedule: StaticSchedule | None = None
    level: TrafficLevel | None = None
    timeline: TimelineSource | None = None
    sim: SimConfig = field(default_factory=lambda: SimConfig(horizon=1800))

    @property
    def static_schedule(self) -> StaticSchedule:
        return self.schedule or StaticSchedule.default(self.junction.n_approaches)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"junction": self.junction.to_dict()}
        if self.level is not None:
            out["level"] = self.level.label
        out["densities"] = list(self.densities)
        out["controller"] = self.controller
        out["dynamic"] = self.params.to_dict()
        if self.schedule is not None:
            out["static"] = self.schedule.to_dict()
        if self.timeline is not None:
            out["timeline"] = self.timeline.to_dict()
        out["sim"] = self.sim.to_dict()
        return out


def _path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "/".join(parts) if parts else "<root>"


def _approach(raw: dict, level: TrafficLevel | None, density: int) -> ApproachSpec:
    present = [k for k in _RANGE_KEYS if k in raw]
    path = f"junction/approaches/{raw['id']}"
    if present and len(present) != len(_RANGE_KEYS):
        missing = sorted(set(_RANGE_KEYS) - set(present))
        raise ScenarioError(f"{path}: give all of inflow/outflow_red/outflow_green or none (missing {missing})")
    if present:
        ranges = [FlowRange.from_list(raw[k]) for k in _RANGE_KEYS]
    else:
        # no explicit ranges: preset of the scenario level, or of this approach's own density
        chosen = level if level is not None else classify_traffic_level(density)
        presets = preset_ranges(chosen)
        ranges = list(presets[(int(raw["id"]) - 1) % len(presets)])
    return ApproachSpec(
        id=int(raw["id"]),
        lanes=int(raw.get("lanes", 2)),
        popularity=float(raw.get("popularity", 1.0)),
        inflow=ranges[0],
        outflow_red=ranges[1],
        outflow_green=ranges[2],
    )


def parse_scenario(doc: str | dict) -> Scenario:
    """Build a Scenario from JSON text or an already-decoded object.

    Raises ScenarioError for syntax and schema problems and ScenarioInvalid
    when the result breaks junction or parameter invariants.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"<root>: malformed JSON: {exc.msg} (line {exc.lineno})") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ScenarioError("; ".join(f"{_path(e)}: {e.message}" for e in errors))

    densities = tuple(int(d) for d in doc["densities"])
    level = TrafficLevel.parse(doc["level"]) if "level" in doc else None

    jdoc = doc.get("junction")
    if jdoc is None:
        jdoc = {"approaches": [{"id": i} for i in range(1, len(densities) + 1)]}
    raw_approaches = jdoc["approaches"]
    if len(densities) != len(raw_approaches):
        raise ScenarioError(
            f"densities: expected {len(raw_approaches)} values (one per approach), got {len(densities)}"
        )
    approaches = tuple(
        _approach(a, level, densities[i]) for i, a in enumerate(raw_approaches)
    )
    junction = JunctionSpec(
        approaches,
        float(jdoc.get("reference_interval", 30.0)),
        float(jdoc.get("clearance", 4.0)),
    )

    params = ControllerParams(**doc.get("dynamic", {}))
    schedule = None
    if "static" in doc:
        n = len(approaches)
        s = doc["static"]
        order = tuple(s.get("order", range(1, n + 1)))
        splits = tuple(s.get("splits", (30,) * n))
        schedule = StaticSchedule(order, splits, s.get("cycle", sum(splits)))

    timeline = None
    if "timeline" in doc:
        t = doc["timeline"]
        bindings = {}
        for key, b in t.get("accident_bindings", {}).items():
            try:
                bindings[int(key)] = AccidentBinding(int(b["approach"]), float(b["start"]))
            except ValueError:
                raise ScenarioError(f"timeline/accident_bindings/{key}: key must be an accident id") from None
        defaults = EffectDefaults(
            emergency_duration=float(t.get("emergency_duration", 60.0)),
            accident_duration=float(t.get("accident_duration", 900.0)),
            capacity_factor=float(t.get("capacity_factor", 0.5)),
            severity_factors={int(k): float(v) for k, v in t.get("severity_factors", {}).items()},
        )
        timeline = TimelineSource(t.get("emergencies"), t.get("accidents"), bindings, defaults, t.get("origin"))

    sdoc = doc.get("sim", {})
    try:
        sim = SimConfig(
            horizon=float(sdoc.get("horizon", 1800)),
            seed=int(sdoc.get("seed", 0)),
            sampler=Sampler.parse(sdoc.get("sampler", "midpoint")),
        )
    except ValueError as exc:
        raise ScenarioInvalid([f"sim: {exc}"]) from None

    scenario = Scenario(
        junction=junction,
        densities=densities,
        controller=doc.get("controller", "dynamic"),
        params=params,
        schedule=schedule,
        level=level,
        timeline=timeline,
        sim=sim,
    )
    problems = check_scenario(scenario)
    if problems:
        raise ScenarioInvalid(problems)
    return scenario


def check_scenario(scenario: Scenario) -> list[str]:
    problems = [str(v) for v in validate(scenario.junction)]
    problems += [f"dynamic: {p}" for p in scenario.params.problems()]
    if scenario.schedule is not None:
        problems += [
            f"static: {p}"
            for p in scenario.schedule.problems(
                scenario.junction.n_approaches, scenario.params.g_min, scenario.junction.clearance
            )
        ]
    d = scenario.timeline.defaults if scenario.timeline else None
    if d is not None:
        if not d.emergency_duration > 0 or not d.accident_duration > 0:
            problems.append("timeline: effect durations must be > 0")
        for f in [d.capacity_factor, *d.severity_factors.values()]:
            if not 0 < f <= 1:
                problems.append(f"timeline: capacity factor {f} outside (0, 1]")
    return problems


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.to_dict(), indent=2) + "\n"
