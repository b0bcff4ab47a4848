"""Wait, fairness and throughput statistics; decision report; CSV series export."""

from __future__ import annotations

import csv
import io
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .controller import Cause, PhasePlan
from .sim import Trace, arrival_times

SERIES_COLUMNS = (
    "phase_index",
    "start_s",
    "approach_id",
    "indication",
    "green_time_s",
    "continuous_red_s_at_phase_start",
    "queue_after",
)


def fmt_number(x: float) -> str:
    """Render without trailing zeros: 120.0 -> '120', 2.50 -> '2.5'."""
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.10f}".rstrip("0").rstrip(".")


@dataclass(frozen=True)
class ApproachWait:
    arrivals: int = 0
    served: int = 0
    remaining: int = 0
    average_wait: float = 0.0
    max_wait: float = 0.0
    max_remaining_wait: float = 0.0
    mean_density: float = 0.0
    cycles_to_pass: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class WaitStats:
    """Per-vehicle waits. Served vehicles feed average/max; vehicles still
    queued at the horizon are counted under ``remaining`` with their wait so
    far in ``max_remaining_wait``."""

    per_approach: tuple[ApproachWait, ...]
    overall: ApproachWait

    def to_dict(self) -> dict:
        return {"overall": asdict(self.overall), "per_approach": [asdict(a) for a in self.per_approach]}


@dataclass(frozen=True)
class FairnessSummary:
    max_wait: float
    wait_spread: float
    starvation_events: int

    def to_dict(self) -> dict:
        return asdict(self)


def _summarise(waits, remaining_waits, cycles, arrivals, densities) -> ApproachWait:
    return ApproachWait(
        arrivals=arrivals,
        served=len(waits),
        remaining=len(remaining_waits),
        average_wait=sum(waits) / len(waits) if waits else 0.0,
        max_wait=max(waits, default=0.0),
        max_remaining_wait=max(remaining_waits, default=0.0),
        mean_density=sum(densities) / len(densities) if densities else 0.0,
        cycles_to_pass=dict(sorted(Counter(cycles).items())),
    )


def wait_stats(trace: Trace) -> WaitStats:
    """Replay the trace in FIFO order to recover every vehicle's wait.

    A vehicle's wait runs from its arrival to the end of the phase it leaves
    in. Cycles-to-pass counts the approach's green phases from the arrival
    phase through the departure phase.
    """
    n = trace.junction.n_approaches
    # each queue entry: (arrival time, greens completed before arrival)
    queues = [deque((t, 0) for t in s.queue) for s in trace.initial_states]
    greens = [0] * n
    waits = [[] for _ in range(n)]
    cycles = [[] for _ in range(n)]
    densities = [[] for _ in range(n)]
    arrivals = [len(q) for q in queues]

    for rec in trace.records:
        for i in range(n):
            before = greens[i]
            if rec.chosen == i + 1:
                greens[i] += 1
            q = queues[i]
            q.extend((t, before) for t in arrival_times(rec.start, rec.duration, rec.inflow[i]))
            arrivals[i] += rec.inflow[i]
            for _ in range(rec.outflow[i]):
                t, marker = q.popleft()
                waits[i].append(rec.end - t)
                cycles[i].append(greens[i] - marker)
            densities[i].append(rec.queue_after[i])

    horizon = trace.horizon
    left = [[horizon - t for t, _ in q] for q in queues]
    per = tuple(
        _summarise(waits[i], left[i], cycles[i], arrivals[i], densities[i]) for i in range(n)
    )
    all_waits = [w for ws in waits for w in ws]
    overall = _summarise(
        all_waits,
        [w for ws in left for w in ws],
        [c for cs in cycles for c in cs],
        sum(arrivals),
        [],
    )
    mean_density = sum(a.mean_density for a in per) / n if n else 0.0
    overall = ApproachWait(**{**asdict(overall), "mean_density": mean_density})
    return WaitStats(per, overall)


def fairness_summary(trace: Trace, stats: WaitStats | None = None) -> FairnessSummary:
    """``max_wait`` is the longest continuous red any approach sat through."""
    stats = stats or wait_stats(trace)
    served = [a.average_wait for a in stats.per_approach if a.served]
    return FairnessSummary(
        max_wait=trace.max_red_duration(),
        wait_spread=max(served) - min(served) if served else 0.0,
        starvation_events=sum(1 for r in trace.records if r.cause is Cause.STARVATION_OVERRIDE),
    )


def compare(dynamic: WaitStats, static_: WaitStats) -> dict[str, float | str]:
    """Percentage reduction of the dynamic run relative to the static one.

    Negative values mean the dynamic run did worse. A zero static value
    yields ``"undefined"`` for that metric.
    """
    pairs = {
        "average_wait": (dynamic.overall.average_wait, static_.overall.average_wait),
        "max_wait": (dynamic.overall.max_wait, static_.overall.max_wait),
        "density": (dynamic.overall.mean_density, static_.overall.mean_density),
    }
    out: dict[str, float | str] = {}
    for name, (dyn, sta) in pairs.items():
        out[name] = "undefined" if sta == 0 else (sta - dyn) / sta * 100.0
    return out


def render_decision_report(
    densities: Sequence[float], weights: Sequence[float], plan: PhasePlan
) -> str:
    if len(densities) != len(weights):
        raise ValueError("densities and weights differ in length")
    lines = ["Context Aware Traffic Report", "", "Vehicle Information", ""]
    lines += [f"Vehicle density at signal {i}: {fmt_number(d)}" for i, d in enumerate(densities, 1)]
    lines += ["", "Effective weight", ""]
    lines += [f"Effective weight of signal {i}: {fmt_number(w)}" for i, w in enumerate(weights, 1)]
    lines += ["", "Maximum Weight", "", f"Maximum Weight: {fmt_number(max(weights, default=0))}"]
    lines += ["", "Green Signal", ""]
    if plan.companion is None:
        lines.append(f"Signal {plan.chosen}: Left, Right, Straight are green")
    else:
        lines.append(
            f"Signal {plan.chosen}: Left, Right, Straight and Signal {plan.companion}: Left are green"
        )
    lines += ["", "Signal Time", "", f"Green Time for signal {plan.chosen}: {fmt_number(plan.duration)} seconds"]
    return "\n".join(lines) + "\n"


def series_rows(trace: Trace):
    for rec in trace.records:
        for i in range(1, trace.junction.n_approaches + 1):
            yield (
                rec.index,
                fmt_number(rec.start),
                i,
                rec.indications.label(i),
                fmt_number(rec.duration if i == rec.chosen else 0),
                fmt_number(rec.red_before[i - 1]),
                rec.queue_after[i - 1],
            )


def export_series(trace: Trace) -> str:
    """One CSV row per (phase, approach), header first, LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SERIES_COLUMNS)
    writer.writerows(series_rows(trace))
    return buf.getvalue()


def run_summary(trace: Trace) -> dict:
    stats = wait_stats(trace)
    return {
        "header": dict(trace.header),
        "phases": len(trace.records),
        "chosen_sequence": [r.chosen for r in trace.records],
        "cause_sequence": [r.cause.value for r in trace.records],
        "wait_stats": stats.to_dict(),
        "fairness": fairness_summary(trace, stats).to_dict(),
    }
