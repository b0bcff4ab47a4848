"""Context-aware junction signal control with a fixed-cycle baseline and phase simulator."""

from .controller import (
    Cause,
    ControllerParams,
    DynamicSignalController,
    PhasePlan,
    StaticSchedule,
    StaticSignalController,
    companion_of,
    effective_weight,
    green_time,
    plan_next_phase,
    select_approach,
    static_next_phase,
)
from .events import EventStore, EventTimeline, active_effects, build_timeline, ingest
from .metrics import (
    compare,
    export_series,
    fairness_summary,
    render_decision_report,
    wait_stats,
)
from .model import (
    ApproachSpec,
    ApproachState,
    FlowRange,
    JunctionSpec,
    TrafficLevel,
    classify_traffic_level,
    preset_junction,
    preset_ranges,
    validate,
)
from .scenario import Scenario, parse_scenario
from .sim import Sampler, SimConfig, Trace, run, sample_count, step_phase

__version__ = "0.1.0"
