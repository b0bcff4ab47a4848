import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from helpers import random_junction

from adaptive_signal.controller import Cause, ControllerParams, PhasePlan, StaticSchedule
from adaptive_signal.events import EventTimeline, accident_entry
from adaptive_signal.metrics import export_series
from adaptive_signal.model import FlowRange, initial_states
from adaptive_signal.sim import Sampler, SimConfig, arrival_times, run, sample_count, step_phase

MID = Sampler.MIDPOINT


@pytest.mark.parametrize(
    "flow, duration, expected",
    [(FlowRange(24, 44), 30, 34), (FlowRange(0, 0), 17, 0), (FlowRange(3, 15), 60, 18),
     (FlowRange(7, 14), 30, 11), (FlowRange(10, 15), 30, 13), (FlowRange(10, 15), 15, 7)],
)
def test_midpoint_sampling(flow, duration, expected):
    # (7+14)/2 = 10.5 -> 11; (10+15)/2 = 12.5 -> 13, halved 6.5 -> 7
    assert sample_count(flow, duration, 30, MID) == expected


def test_midpoint_draws_no_randomness():
    rng = np.random.default_rng(1)
    before = rng.bit_generator.state
    sample_count(FlowRange(3, 15), 30, 30, MID, rng)
    assert rng.bit_generator.state == before


@settings(max_examples=300)
@given(st.integers(0, 60), st.integers(0, 60), st.integers(1, 120), st.integers(0, 2**32))
def test_uniform_within_scaled_bounds(a, b, duration, seed):
    lo, hi = sorted((a, b))
    rng = np.random.default_rng(seed)
    n = sample_count(FlowRange(lo, hi), duration, 30, Sampler.UNIFORM, rng)
    scale = duration / 30
    assert np.floor(lo * scale + 0.5) <= n <= np.floor(hi * scale + 0.5)


def test_sample_count_rejects_bad_duration():
    with pytest.raises(ValueError):
        sample_count(FlowRange(1, 2), 0, 30, MID)


def test_arrival_times_even_spacing():
    assert arrival_times(100.0, 30.0, 2) == (110.0, 120.0)
    assert arrival_times(0.0, 30.0, 0) == ()


class TestStepPhase:
    def plan(self, chosen=4, duration=30):
        return PhasePlan(chosen, duration, Cause.MAX_WEIGHT, chosen - 1 if chosen > 1 else 4)

    def test_chosen_approach_discharges_green_range(self, medium_junction, medium_densities):
        states, rec = step_phase(initial_states(medium_densities), medium_junction, self.plan(), MID)
        # approach 4: 120 + 9 arrivals - 34 departures
        assert (rec.queue_before[3], rec.inflow[3], rec.outflow[3], rec.queue_after[3]) == (120, 9, 34, 95)
        # red approaches discharge their red range: 12, 13, 9
        assert rec.outflow[:3] == (12, 13, 9)

    def test_empty_red_queue_cannot_discharge_more_than_arrivals(self, medium_junction):
        _, rec = step_phase(initial_states([0, 0, 0, 0]), medium_junction, self.plan(chosen=4), MID)
        assert rec.outflow[0] == rec.inflow[0] == 9
        assert rec.queue_after[0] == 0

    def test_accident_halves_capacity(self, medium_junction, medium_densities):
        _, rec = step_phase(initial_states(medium_densities), medium_junction, self.plan(), MID, accident_effects={4: 0.5})
        assert rec.outflow[3] == 17
        assert rec.capacity_factor == (1.0, 1.0, 1.0, 0.5)

    def test_fifo_and_timestamps(self, medium_junction):
        start_states = initial_states([2, 0, 0, 0], at=0.0)
        states, rec = step_phase(start_states, medium_junction, self.plan(chosen=2), MID, start=100.0)
        # approach 1: 2 old + 9 new (spaced 3 s apart), 12 red departures -> queue empty
        assert rec.outflow[0] == 11 and states[0].queue == ()
        # approach 3 keeps its 9 arrivals, 9 departures drain them all
        assert states[2].density == 0
        states, _ = step_phase(initial_states([20, 0, 0, 0]), medium_junction, self.plan(chosen=2), MID, start=100.0)
        assert states[0].queue == (0.0,) * 8 + arrival_times(100.0, 30, 9)

    def test_red_time_bookkeeping(self, medium_junction):
        st0 = initial_states([5, 5, 5, 5])
        st1, _ = step_phase(st0, medium_junction, self.plan(chosen=4), MID)
        assert [s.red_duration for s in st1] == [34.0, 34.0, 34.0, 0.0]
        assert [s.cycles_waited for s in st1] == [1, 1, 1, 0]
        st2, rec = step_phase(st1, medium_junction, self.plan(chosen=1, duration=10), MID, start=34)
        assert rec.red_before == (34.0, 34.0, 34.0, 0.0)
        assert [s.red_duration for s in st2] == [0.0, 48.0, 48.0, 14.0]

    def test_length_mismatch(self, medium_junction):
        with pytest.raises(ValueError):
            step_phase(initial_states([1, 2]), medium_junction, self.plan(), MID)


class TestRun:
    def test_first_phase_is_reference_decision(self, medium_junction, medium_densities):
        trace = run(medium_junction, ControllerParams(), SimConfig(600), densities=medium_densities)
        first = trace.records[0]
        assert (first.chosen, first.duration, first.companion, first.cause) == (4, 30, 3, Cause.MAX_WEIGHT)

    def test_short_horizon_gives_empty_trace(self, medium_junction, medium_densities):
        trace = run(medium_junction, ControllerParams(), SimConfig(13), densities=[0, 0, 0, 0])
        assert trace.records == ()
        assert trace.final_states == initial_states([0, 0, 0, 0])

    def test_phases_are_contiguous_and_within_horizon(self, medium_junction, medium_densities):
        trace = run(medium_junction, ControllerParams(), SimConfig(1800), densities=medium_densities)
        for prev, nxt in zip(trace.records, trace.records[1:]):
            assert nxt.start == prev.start + prev.duration + medium_junction.clearance
        last = trace.records[-1]
        assert last.end + medium_junction.clearance <= 1800

    @pytest.mark.parametrize("sampler", list(Sampler))
    def test_deterministic(self, medium_junction, medium_densities, sampler):
        cfg = SimConfig(1200, seed=99, sampler=sampler)
        a = run(medium_junction, ControllerParams(), cfg, densities=medium_densities)
        b = run(medium_junction, ControllerParams(), cfg, densities=medium_densities)
        assert a == b
        assert export_series(a).encode() == export_series(b).encode()

    def test_seed_matters_for_uniform(self, medium_junction, medium_densities):
        a = run(medium_junction, ControllerParams(), SimConfig(1200, 1, Sampler.UNIFORM), densities=medium_densities)
        b = run(medium_junction, ControllerParams(), SimConfig(1200, 2, Sampler.UNIFORM), densities=medium_densities)
        assert a.records != b.records

    def test_accident_window_reduces_outflow(self, medium_junction, medium_densities):
        timeline = EventTimeline((accident_entry(4, 0, 900, 0.5),))
        trace = run(medium_junction, StaticSchedule(), SimConfig(600), timeline, medium_densities)
        green4 = [r for r in trace.records if r.chosen == 4]
        assert green4[0].capacity_factor[3] == 0.5 and green4[0].outflow[3] == 17

    def test_header_records_inputs(self, medium_junction, medium_densities):
        trace = run(medium_junction, StaticSchedule(), SimConfig(600, seed=5), densities=medium_densities)
        assert trace.header["controller"] == "static"
        assert trace.header["seed"] == 5 and trace.header["sampler"] == "midpoint"
        assert trace.header["effect_defaults"]["capacity_factor"] == 0.5

    def test_rejects_bad_config(self):
        with pytest.raises(ValueError):
            SimConfig(0)
        with pytest.raises(ValueError):
            SimConfig(10, seed=2**64)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(list(Sampler)), st.booleans())
def test_conservation_and_non_negativity(seed, sampler, dynamic):
    rng = np.random.default_rng(seed)
    junction = random_junction(rng)
    densities = [int(d) for d in rng.integers(0, 200, size=junction.n_approaches)]
    controller = ControllerParams() if dynamic else StaticSchedule.default(junction.n_approaches)
    trace = run(junction, controller, SimConfig(600, seed, sampler), densities=densities)
    assert trace.total_arrivals() == trace.total_departures() + sum(s.density for s in trace.final_states)
    for rec in trace.records:
        for qb, i, o, qa in zip(rec.queue_before, rec.inflow, rec.outflow, rec.queue_after):
            assert qa == max(0, qb + i - o) and o <= qb + i and qa >= 0
    if dynamic:
        assert trace.max_red_duration() <= 100 + 60 + 2 * 4
