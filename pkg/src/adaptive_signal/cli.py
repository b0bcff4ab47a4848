"""Command-line entry point.

Exit codes: 0 success, 1 validation or ingestion rejections, 2 I/O or
schema errors. Diagnostics go to stderr, data to stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence, TextIO

from .controller import DynamicSignalController, StaticSignalController
from .events import EventStore, RecordKind
from .metrics import compare, export_series, render_decision_report, run_summary, wait_stats
from .scenario import Scenario, ScenarioError, ScenarioInvalid, load_scenario
from .sim import Sampler, SimConfig, run

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_ERROR = 2


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-signal", description="Context-aware junction signal control and simulation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, scenario_required: bool = True) -> None:
        p.add_argument("--scenario", required=scenario_required, help="JSON scenario file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--sampler", choices=["midpoint", "uniform"], help="override the sampler")
        p.add_argument("--horizon", type=float, help="override the horizon in seconds")

    common(sub.add_parser("decide", help="print the decision report for the initial densities"))
    p = sub.add_parser("simulate", help="run one controller and write its trace")
    common(p)
    p.add_argument("--controller", choices=["dynamic", "static"], help="override the scenario controller")
    common(sub.add_parser("compare", help="run dynamic and static controllers on identical inputs"))
    common(sub.add_parser("validate", help="check a scenario and exit"))

    p = sub.add_parser("ingest", help="append emergency/accident JSON Lines records to a store")
    common(p, scenario_required=False)
    p.add_argument("--kind", required=True, choices=[k.value for k in RecordKind])
    p.add_argument("--store", required=True, help="JSON Lines store path")
    p.add_argument("input", nargs="?", default="-", help="JSON Lines input file, '-' for stdin")
    return parser


def _load(args) -> Scenario:
    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        raise CommandFailed(EXIT_ERROR, f"cannot read scenario: {exc}") from None
    except ScenarioError as exc:
        raise CommandFailed(EXIT_ERROR, f"schema error: {exc}") from None
    except ScenarioInvalid as exc:
        raise CommandFailed(EXIT_REJECTED, "invalid scenario:\n  " + "\n  ".join(exc.problems)) from None
    sim = scenario.sim
    try:
        sim = SimConfig(
            horizon=args.horizon if args.horizon is not None else sim.horizon,
            seed=args.seed if args.seed is not None else sim.seed,
            sampler=Sampler.parse(args.sampler) if args.sampler else sim.sampler,
        )
    except ValueError as exc:
        raise CommandFailed(EXIT_REJECTED, f"invalid override: {exc}") from None
    return replace(scenario, sim=sim)


def _timeline(scenario: Scenario, args):
    if scenario.timeline is None:
        return None
    try:
        timeline, problems = scenario.timeline.load(scenario.junction, Path(args.scenario).parent)
    except OSError as exc:
        raise CommandFailed(EXIT_ERROR, f"cannot read event store: {exc}") from None
    if problems:
        raise CommandFailed(EXIT_REJECTED, "timeline rejections:\n  " + "\n  ".join(problems))
    return timeline


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandFailed(EXIT_ERROR, f"cannot create output directory: {exc}") from None
    return out


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as exc:
        raise CommandFailed(EXIT_ERROR, f"cannot write {path}: {exc}") from None


def _run(scenario: Scenario, kind: str, timeline):
    if kind == "dynamic":
        controller = DynamicSignalController.from_params(scenario.params)
    else:
        controller = StaticSignalController.from_schedule(scenario.static_schedule)
    defaults = scenario.timeline.defaults if scenario.timeline else None
    return run(scenario.junction, controller, scenario.sim, timeline, scenario.densities, defaults)


def cmd_decide(args, stdout: TextIO) -> int:
    scenario = _load(args)
    controller = DynamicSignalController.from_params(scenario.params).fit(scenario.junction)
    plan = controller.decide(scenario.densities)
    weights = controller.transform(scenario.densities)[0]
    stdout.write(render_decision_report(scenario.densities, weights, plan))
    return EXIT_OK


def cmd_simulate(args, stdout: TextIO) -> int:
    scenario = _load(args)
    kind = args.controller or scenario.controller
    trace = _run(scenario, kind, _timeline(scenario, args))
    out = _out_dir(args)
    if out is None:
        stdout.write(export_series(trace))
        return EXIT_OK
    summary = run_summary(trace)
    _write(out / "trace.csv", export_series(trace))
    _write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    overall = summary["wait_stats"]["overall"]
    stdout.write(
        f"{kind}: {summary['phases']} phases, served {overall['served']}, "
        f"remaining {overall['remaining']}, average wait {overall['average_wait']:.1f} s, "
        f"max wait {overall['max_wait']:.1f} s\n"
    )
    return EXIT_OK


def cmd_compare(args, stdout: TextIO) -> int:
    scenario = _load(args)
    timeline = _timeline(scenario, args)
    dynamic = _run(scenario, "dynamic", timeline)
    static = _run(scenario, "static", timeline)
    result = {
        "improvement_pct": compare(wait_stats(dynamic), wait_stats(static)),
        "dynamic": run_summary(dynamic),
        "static": run_summary(static),
    }
    out = _out_dir(args)
    if out is not None:
        _write(out / "dynamic.csv", export_series(dynamic))
        _write(out / "static.csv", export_series(static))
        _write(out / "summary.json", json.dumps(result, indent=2) + "\n")
    lines = []
    for name in ("dynamic", "static"):
        overall = result[name]["wait_stats"]["overall"]
        lines.append(
            f"{name}: average wait {overall['average_wait']:.1f} s, max wait {overall['max_wait']:.1f} s, "
            f"mean density {overall['mean_density']:.1f}"
        )
    for metric, value in result["improvement_pct"].items():
        shown = value if isinstance(value, str) else f"{value:.1f}%"
        lines.append(f"{metric} reduction: {shown}")
    stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_validate(args, stdout: TextIO) -> int:
    scenario = _load(args)
    _timeline(scenario, args)
    stdout.write(f"ok: {scenario.junction.n_approaches} approaches\n")
    return EXIT_OK


def cmd_ingest(args, stdout: TextIO, stdin: TextIO) -> int:
    n_approaches = _load(args).junction.n_approaches if args.scenario else None
    store = EventStore(args.store, args.kind)
    try:
        if args.input == "-":
            result = store.ingest(stdin, n_approaches)
        else:
            with open(args.input, encoding="utf-8") as f:
                result = store.ingest(f, n_approaches)
    except OSError as exc:
        raise CommandFailed(EXIT_ERROR, f"ingest failed: {exc}") from None
    for rejection in result.rejected:
        print(f"rejected {rejection}", file=sys.stderr)
    stdout.write(
        f"accepted {len(result.accepted)}, rejected {len(result.rejected)}, "
        f"duplicates {result.duplicates}\n"
    )
    return EXIT_REJECTED if result.rejected else EXIT_OK


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stdin: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stdin = stdin or sys.stdin
    args = build_parser().parse_args(argv)
    handlers = {
        "decide": cmd_decide,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "validate": cmd_validate,
    }
    try:
        if args.command == "ingest":
            return cmd_ingest(args, stdout, stdin)
        return handlers[args.command](args, stdout)
    except CommandFailed as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
