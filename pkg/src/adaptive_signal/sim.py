"""Deterministic phase-by-phase junction simulation.

Time advances one phase at a time: a green of the planned duration followed
by an all-red clearance. Vehicle counts for a phase are drawn from the
approach's flow ranges scaled from the reference interval to the phase
duration, so arrivals and departures balance exactly over a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np
from sklearn.base import clone

from .controller import (
    Cause,
    ControllerParams,
    DynamicSignalController,
    PhasePlan,
    StaticSchedule,
    StaticSignalController,
)
from .events import EffectDefaults, EventTimeline, active_effects
from .model import (
    ApproachState,
    FlowRange,
    JunctionSpec,
    MovementIndication,
    initial_states,
    round_half_up,
)
from .validation import check_junction


class Sampler(str, Enum):
    MIDPOINT = "midpoint"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, value: str | Sampler) -> Sampler:
        if isinstance(value, Sampler):
            return value
        key = str(value).strip().lower()
        aliases = {"midpoint": cls.MIDPOINT, "uniform": cls.UNIFORM, "uniformrandom": cls.UNIFORM}
        if key not in aliases:
            raise ValueError(f"unknown sampler {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    seed: int = 0
    sampler: Sampler = Sampler.MIDPOINT

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "sampler", Sampler.parse(self.sampler))

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "seed": int(self.seed), "sampler": self.sampler.value}


def sample_count(
    flow: FlowRange,
    duration: float,
    reference_interval: float,
    sampler: Sampler,
    rng: np.random.Generator | None = None,
) -> int:
    """Vehicle count for ``duration`` seconds from a per-interval range.

    MIDPOINT uses (low + high) / 2 rounded half-up and draws nothing from
    ``rng``. UNIFORM draws an integer uniformly from [low, high] inclusive.
    Scaling to the duration rounds half-up.
    """
    if not duration > 0 or not reference_interval > 0:
        raise ValueError("duration and reference_interval must be > 0")
    if sampler is Sampler.MIDPOINT:
        base = math.floor(Fraction(flow.low + flow.high, 2) + Fraction(1, 2))
    else:
        base = int(rng.integers(flow.low, flow.high, endpoint=True))
    scaled = Fraction(base) * Fraction(duration) / Fraction(reference_interval)
    return math.floor(scaled + Fraction(1, 2))


def arrival_times(start: float, duration: float, n: int) -> tuple[float, ...]:
    """Timestamps of ``n`` arrivals spread evenly inside a phase."""
    return tuple(start + k * duration / (n + 1) for k in range(1, n + 1))


@dataclass(frozen=True)
class PhaseRecord:
    index: int
    start: float
    duration: float
    chosen: int
    companion: int | None
    cause: Cause
    indications: MovementIndication
    inflow: tuple[int, ...]
    outflow: tuple[int, ...]
    queue_before: tuple[int, ...]
    queue_after: tuple[int, ...]
    red_before: tuple[float, ...]
    capacity_factor: tuple[float, ...]

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Trace:
    junction: JunctionSpec
    initial_states: tuple[ApproachState, ...]
    records: tuple[PhaseRecord, ...]
    final_states: tuple[ApproachState, ...]
    header: Mapping[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.header.get("horizon", self.records[-1].end if self.records else 0.0))

    def total_arrivals(self) -> int:
        initial = sum(s.density for s in self.initial_states)
        return initial + sum(sum(r.inflow) for r in self.records)

    def total_departures(self) -> int:
        return sum(sum(r.outflow) for r in self.records)

    def max_red_duration(self) -> float:
        """Longest continuous red seen by any approach, at a phase start or at the end."""
        reds = [red for r in self.records for red in r.red_before]
        reds.extend(s.red_duration for s in self.final_states)
        return max(reds, default=0.0)


def step_phase(
    states: Sequence[ApproachState],
    junction: JunctionSpec,
    plan: PhasePlan,
    sampler: Sampler,
    rng: np.random.Generator | None = None,
    accident_effects: Mapping[int, float] | None = None,
    start: float = 0.0,
    index: int = 0,
) -> tuple[tuple[ApproachState, ...], PhaseRecord]:
    specs = junction.approaches
    if len(states) != len(specs):
        raise ValueError(f"{len(states)} states for {len(specs)} approaches")
    if not 1 <= plan.chosen <= len(specs):
        raise ValueError(f"plan chooses unknown approach {plan.chosen}")
    accident_effects = accident_effects or {}
    ref = junction.reference_interval
    step = plan.duration + junction.clearance

    new_states = []
    inflow, outflow, before, after, reds, factors = [], [], [], [], [], []
    for spec, state in zip(specs, states):
        arrived = sample_count(spec.inflow, plan.duration, ref, sampler, rng)
        served = spec.id == plan.chosen
        flow = spec.outflow_green if served else spec.outflow_red
        capacity = sample_count(flow, plan.duration, ref, sampler, rng)
        factor = accident_effects.get(spec.id, 1.0)
        if factor != 1.0:
            capacity = round_half_up(capacity * factor)
        queue = state.queue + arrival_times(start, plan.duration, arrived)
        departed = min(capacity, len(queue))
        queue = queue[departed:]

        inflow.append(arrived)
        outflow.append(departed)
        before.append(state.density)
        after.append(len(queue))
        reds.append(state.red_duration)
        factors.append(factor)
        if served:
            new_states.append(ApproachState(queue, 0.0, 0))
        else:
            new_states.append(ApproachState(queue, state.red_duration + step, state.cycles_waited + 1))

    record = PhaseRecord(
        index=index,
        start=start,
        duration=plan.duration,
        chosen=plan.chosen,
        companion=plan.companion,
        cause=plan.cause,
        indications=MovementIndication.for_phase(len(specs), plan.chosen, plan.companion),
        inflow=tuple(inflow),
        outflow=tuple(outflow),
        queue_before=tuple(before),
        queue_after=tuple(after),
        red_before=tuple(reds),
        capacity_factor=tuple(factors),
    )
    return tuple(new_states), record


def _as_estimator(controller):
    if isinstance(controller, ControllerParams):
        return DynamicSignalController.from_params(controller)
    if isinstance(controller, StaticSchedule):
        return StaticSignalController.from_schedule(controller)
    if isinstance(controller, (DynamicSignalController, StaticSignalController)):
        return clone(controller)
    raise TypeError(f"unsupported controller {type(controller).__name__}")


def run(
    junction: JunctionSpec,
    controller,
    config: SimConfig,
    timeline: EventTimeline | None = None,
    densities: Sequence[int] | None = None,
    effect_defaults: EffectDefaults | None = None,
) -> Trace:
    """Simulate until the next phase (green plus clearance) would pass the horizon.

    ``controller`` is a fitted or unfitted controller estimator, or bare
    ``ControllerParams`` / ``StaticSchedule``. Emergencies active within the
    first ``g_min`` seconds of a phase are handed to the controller when it
    plans that phase. Identical arguments give identical traces.
    """
    check_junction(junction)
    estimator = _as_estimator(controller).fit(junction)
    n = junction.n_approaches
    densities = list(densities) if densities is not None else [0] * n
    if len(densities) != n:
        raise ValueError(f"{len(densities)} densities for {n} approaches")
    timeline = timeline or EventTimeline()

    rng = np.random.default_rng(int(config.seed))
    start_states = initial_states(densities)
    states = start_states
    records: list[PhaseRecord] = []
    t = 0.0
    lookahead = float(estimator.g_min)
    while True:
        emergencies, _ = active_effects(timeline, t, t + lookahead)
        plan = estimator.plan_phase(states, len(records), emergencies)
        if t + plan.duration + junction.clearance > config.horizon:
            break
        _, factors = active_effects(timeline, t, t + plan.duration)
        states, record = step_phase(
            states, junction, plan, config.sampler, rng, factors, start=t, index=len(records)
        )
        records.append(record)
        t += plan.duration + junction.clearance

    header = {
        **estimator.describe(),
        "junction": junction.to_dict(),
        "densities": [int(d) for d in densities],
        **config.to_dict(),
        "timeline": timeline.to_dict(),
        "effect_defaults": (effect_defaults or EffectDefaults()).to_dict(),
    }
    return Trace(junction, start_states, tuple(records), states, header)
