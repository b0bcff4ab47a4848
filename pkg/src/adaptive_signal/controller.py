"""Phase planning: the density-driven dynamic controller and the fixed-cycle baseline.

Both planners are plain functions over passed-in state. The estimator
classes at the bottom wrap them in the scikit-learn ``BaseEstimator``
interface so parameters can be inspected, cloned and grid-searched.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import (
    MIN_APPROACHES,
    ApproachSpec,
    ApproachState,
    JunctionSpec,
    initial_states,
    round_half_up,
)
from .validation import check_densities, check_junction


class Cause(str, Enum):
    MAX_WEIGHT = "MaxWeight"
    STARVATION_OVERRIDE = "StarvationOverride"
    EMERGENCY = "Emergency"
    STATIC_SCHEDULE = "StaticSchedule"


@dataclass(frozen=True)
class ControllerParams:
    """Tuning of the dynamic controller.

    alpha is green seconds granted per unit of winning weight; the result is
    clamped to [g_min, g_max]. An approach red for t_starve seconds or more
    preempts the weight ranking. ``lookahead`` additionally shortens or
    redirects phases that would push another approach past t_starve.
    """

    alpha: float = 0.25
    g_min: float = 10
    g_max: float = 60
    t_starve: float = 100
    emergency_green: float = 30
    lane_reference: float = 2
    lookahead: bool = True

    def problems(self) -> list[str]:
        out = []
        if not self.alpha > 0:
            out.append("alpha must be > 0")
        if not 0 < self.g_min <= self.g_max:
            out.append("need 0 < g_min <= g_max")
        if not self.t_starve > self.g_max:
            out.append("t_starve must exceed g_max")
        if not self.g_min <= self.emergency_green <= self.g_max:
            out.append("emergency_green must lie in [g_min, g_max]")
        if not self.lane_reference > 0:
            out.append("lane_reference must be > 0")
        return out

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PhasePlan:
    chosen: int
    duration: float
    cause: Cause
    companion: int | None = None

    def __post_init__(self) -> None:
        if self.companion is not None and self.companion == self.chosen:
            raise ValueError("companion must differ from chosen approach")


@dataclass(frozen=True)
class StaticSchedule:
    """Fixed rotation. ``splits`` are green seconds indexed by approach id - 1."""

    order: tuple[int, ...] = (1, 2, 3, 4)
    splits: tuple[float, ...] = (30, 30, 30, 30)
    cycle: float = 120

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        object.__setattr__(self, "splits", tuple(self.splits))

    @classmethod
    def default(cls, n: int, split: float = 30) -> StaticSchedule:
        return cls(tuple(range(1, n + 1)), (split,) * n, split * n)

    def problems(self, n: int, g_min: float = 10, clearance: float = 4) -> list[str]:
        out = []
        if sorted(self.order) != list(range(1, n + 1)):
            out.append(f"order {list(self.order)} is not a permutation of 1..{n}")
        if len(self.splits) != n:
            out.append(f"expected {n} splits, got {len(self.splits)}")
        if any(s < g_min for s in self.splits):
            out.append(f"every split must be >= g_min ({g_min})")
        green = sum(self.splits)
        # the cycle may be quoted with or without the clearance gaps
        if not (math.isclose(self.cycle, green) or math.isclose(self.cycle, green + n * clearance)):
            out.append(
                f"cycle {self.cycle} matches neither sum of splits ({green}) "
                f"nor splits plus clearance ({green + n * clearance})"
            )
        return out

    def to_dict(self) -> dict:
        return {"order": list(self.order), "splits": list(self.splits), "cycle": self.cycle}


def effective_weight(state: ApproachState, spec: ApproachSpec, params: ControllerParams) -> float:
    return state.density * _weight_factor(spec, params)


def _weight_factor(spec: ApproachSpec, params: ControllerParams) -> float:
    return spec.popularity * (spec.lanes / params.lane_reference)


def select_approach(
    weights: Sequence[tuple[int, float]],
    states: Sequence[ApproachState],
    params: ControllerParams,
) -> tuple[int, Cause]:
    """Pick the approach to serve next.

    Any approach red for at least ``t_starve`` wins outright (longest red
    first); otherwise the heaviest weight wins. Ties go to the lowest id.
    """
    if not weights:
        raise ValueError("no approaches")
    if len(states) != len(weights):
        raise ValueError("weights and states differ in length")
    starved = [
        (state.red_duration, approach_id)
        for (approach_id, _), state in zip(weights, states)
        if state.red_duration >= params.t_starve
    ]
    if starved:
        longest = max(r for r, _ in starved)
        return min(i for r, i in starved if r == longest), Cause.STARVATION_OVERRIDE
    heaviest = max(w for _, w in weights)
    return min(i for i, w in weights if w == heaviest), Cause.MAX_WEIGHT


def companion_of(chosen: int, n: int) -> int:
    """Approach granted a left-turn green alongside ``chosen``: the previous id, wrapping."""
    if n < MIN_APPROACHES:
        raise ValueError(f"companion needs at least {MIN_APPROACHES} approaches, got {n}")
    if not 1 <= chosen <= n:
        raise ValueError(f"approach {chosen} out of range 1..{n}")
    return n if chosen == 1 else chosen - 1


def _companion_or_none(chosen: int, n: int) -> int | None:
    return companion_of(chosen, n) if n >= MIN_APPROACHES else None


def green_time(max_weight: float, params: ControllerParams) -> float:
    if max_weight < 0:
        raise ValueError("weight must be non-negative")
    return max(params.g_min, min(params.g_max, round_half_up(params.alpha * max_weight)))


def fair_duration_limit(
    states: Sequence[ApproachState],
    chosen: int,
    params: ControllerParams,
    clearance: float,
) -> float:
    """Longest green for ``chosen`` after which all other approaches can still be
    served, longest-red first at ``g_min`` each, before reaching ``t_starve``."""
    others = sorted(
        (s.red_duration for i, s in enumerate(states, start=1) if i != chosen), reverse=True
    )
    slot = params.g_min + clearance
    return min(
        (params.t_starve - red - clearance - k * slot for k, red in enumerate(others)),
        default=math.inf,
    )


def _longest_red(states: Sequence[ApproachState]) -> int:
    longest = max(s.red_duration for s in states)
    return next(i for i, s in enumerate(states, start=1) if s.red_duration == longest)


def plan_next_phase(
    states: Sequence[ApproachState],
    specs: Sequence[ApproachSpec],
    params: ControllerParams,
    active_emergencies: Iterable[int] = (),
    clearance: float = 4.0,
) -> PhasePlan:
    n = len(specs)
    if len(states) != n:
        raise ValueError(f"{len(states)} states for {n} approaches")

    emergencies = sorted(set(active_emergencies))
    if emergencies:
        chosen = emergencies[0]
        if not 1 <= chosen <= n:
            raise ValueError(f"emergency approach {chosen} out of range 1..{n}")
        return PhasePlan(chosen, params.emergency_green, Cause.EMERGENCY, _companion_or_none(chosen, n))

    weights = [(spec.id, effective_weight(st, spec, params)) for spec, st in zip(specs, states)]
    chosen, cause = select_approach(weights, states, params)
    duration = green_time(weights[chosen - 1][1], params)

    if params.lookahead:
        limit = fair_duration_limit(states, chosen, params, clearance)
        if limit < params.g_min and cause is Cause.MAX_WEIGHT:
            fallback = _longest_red(states)
            if fallback != chosen:
                chosen, cause = fallback, Cause.STARVATION_OVERRIDE
                duration = green_time(weights[chosen - 1][1], params)
                limit = fair_duration_limit(states, chosen, params, clearance)
        if limit < duration:
            duration = max(params.g_min, math.floor(limit))

    return PhasePlan(chosen, duration, cause, _companion_or_none(chosen, n))


def static_next_phase(schedule: StaticSchedule, phase_index: int) -> PhasePlan:
    if phase_index < 0:
        raise ValueError("phase_index must be >= 0")
    n = len(schedule.order)
    chosen = schedule.order[phase_index % n]
    return PhasePlan(
        chosen, schedule.splits[chosen - 1], Cause.STATIC_SCHEDULE, _companion_or_none(chosen, n)
    )


class DynamicSignalController(BaseEstimator):
    """Context-aware controller as an estimator.

    ``fit`` binds a validated junction. ``transform`` maps densities to
    effective weights, ``predict`` to the approach that would get green from
    a fresh (never-red) state. ``plan`` is the full decision used by the
    simulator.
    """

    def __init__(
        self,
        alpha=0.25,
        g_min=10,
        g_max=60,
        t_starve=100,
        emergency_green=30,
        lane_reference=2,
        lookahead=True,
    ):
        self.alpha = alpha
        self.g_min = g_min
        self.g_max = g_max
        self.t_starve = t_starve
        self.emergency_green = emergency_green
        self.lane_reference = lane_reference
        self.lookahead = lookahead

    @classmethod
    def from_params(cls, params: ControllerParams) -> DynamicSignalController:
        return cls(**params.to_dict())

    @property
    def controller_params(self) -> ControllerParams:
        return ControllerParams(**self.get_params())

    def fit(self, junction: JunctionSpec, y=None):
        params = self.controller_params
        problems = params.problems()
        if problems:
            raise ValueError("; ".join(problems))
        self.junction_ = check_junction(junction)
        self.n_approaches_ = junction.n_approaches
        self.params_ = params
        self.weight_factors_ = np.array(
            [_weight_factor(a, params) for a in junction.approaches], dtype=float
        )
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self)
        return check_densities(X, self.n_approaches_) * self.weight_factors_

    def fit_transform(self, junction: JunctionSpec, X) -> np.ndarray:
        return self.fit(junction).transform(X)

    def predict(self, X) -> np.ndarray:
        weights = self.transform(X)
        # argmax returns the first maximum, i.e. the lowest id on ties
        return weights.argmax(axis=1) + 1

    def plan(self, states: Sequence[ApproachState], emergencies: Iterable[int] = ()) -> PhasePlan:
        check_is_fitted(self)
        return plan_next_phase(
            states, self.junction_.approaches, self.params_, emergencies, self.junction_.clearance
        )

    def decide(self, densities: Sequence[int], emergencies: Iterable[int] = ()) -> PhasePlan:
        return self.plan(initial_states(densities), emergencies)

    def plan_phase(self, states, phase_index: int, emergencies: Iterable[int] = ()) -> PhasePlan:
        return self.plan(states, emergencies)

    def describe(self) -> dict:
        return {"controller": "dynamic", "params": self.controller_params.to_dict()}


class StaticSignalController(BaseEstimator):
    """Fixed-time rotation. Ignores queues and emergency reports.

    Unset ``order``/``splits``/``cycle`` resolve at fit time to 1..N,
    30 s each, and their sum.
    """

    def __init__(self, order=None, splits=None, cycle=None, g_min=10):
        self.order = order
        self.splits = splits
        self.cycle = cycle
        self.g_min = g_min

    @classmethod
    def from_schedule(cls, schedule: StaticSchedule) -> StaticSignalController:
        return cls(order=schedule.order, splits=schedule.splits, cycle=schedule.cycle)

    def fit(self, junction: JunctionSpec, y=None):
        self.junction_ = check_junction(junction)
        n = junction.n_approaches
        order = tuple(self.order) if self.order is not None else tuple(range(1, n + 1))
        splits = tuple(self.splits) if self.splits is not None else (30,) * n
        cycle = self.cycle if self.cycle is not None else sum(splits)
        schedule = StaticSchedule(order, splits, cycle)
        problems = schedule.problems(n, self.g_min, junction.clearance)
        if problems:
            raise ValueError("; ".join(problems))
        self.schedule_ = schedule
        self.n_approaches_ = n
        return self

    def predict(self, X) -> np.ndarray:
        """Approach served in phase i for each row i of X; the rows' values are ignored."""
        check_is_fitted(self)
        arr = check_densities(X, self.n_approaches_)
        return np.array([self.schedule_.order[i % self.n_approaches_] for i in range(len(arr))])

    def plan_phase(self, states, phase_index: int, emergencies: Iterable[int] = ()) -> PhasePlan:
        check_is_fitted(self)
        return static_next_phase(self.schedule_, phase_index)

    def describe(self) -> dict:
        check_is_fitted(self)
        return {"controller": "static", "schedule": self.schedule_.to_dict()}


__all__ = [
    "Cause",
    "ControllerParams",
    "DynamicSignalController",
    "PhasePlan",
    "StaticSchedule",
    "StaticSignalController",
    "companion_of",
    "effective_weight",
    "fair_duration_limit",
    "green_time",
    "plan_next_phase",
    "select_approach",
    "static_next_phase",
]
