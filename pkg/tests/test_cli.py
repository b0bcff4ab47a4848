import csv
import io
import json
from pathlib import Path

import pytest

from adaptive_signal.cli import main
from adaptive_signal.scenario import ScenarioError, ScenarioInvalid, dump_scenario, load_scenario, parse_scenario

ROOT = Path(__file__).resolve().parents[1]
MEDIUM = ROOT / "scenarios" / "medium.json"
EXPLICIT = ROOT / "scenarios" / "medium_explicit.json"

EMERGENCY = {"name": "A Commuter", "email": "commuter@example.com", "lat": 19.17, "lng": 78.57,
             "kind": "Ambulance", "alert_no": 1, "time": 120, "signal": 2}
ACCIDENT = {"id": 77, "name": "Major Accident", "address": "Thane East", "lat": 19.17, "lng": 72.97, "type": 5}


def cli(*argv, stdin=""):
    out = io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stdin=io.StringIO(stdin))
    return code, out.getvalue()


def write_scenario(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestScenarioParsing:
    def test_level_preset_equals_explicit_ranges(self):
        preset = load_scenario(MEDIUM)
        explicit = load_scenario(EXPLICIT)
        assert preset.junction == explicit.junction

    def test_round_trip(self):
        scenario = load_scenario(EXPLICIT)
        assert parse_scenario(dump_scenario(scenario)) == scenario

    def test_unknown_key_names_path(self):
        with pytest.raises(ScenarioError, match="sim"):
            parse_scenario({"densities": [1, 2, 3], "sim": {"horizon": 10, "speed": 3}})

    def test_density_length_mismatch(self):
        doc = json.loads(EXPLICIT.read_text())
        doc["densities"] = [1, 2, 3]
        with pytest.raises(ScenarioError, match="^densities"):
            parse_scenario(doc)

    def test_inverted_range_is_invalid(self):
        doc = json.loads(EXPLICIT.read_text())
        doc["junction"]["approaches"][1]["inflow"] = [15, 3]
        with pytest.raises(ScenarioInvalid) as exc:
            parse_scenario(doc)
        assert exc.value.problems == ["approach 2: inflow: min > max"]

    def test_partial_ranges_rejected(self):
        doc = {"junction": {"approaches": [{"id": i, "inflow": [1, 2]} for i in (1, 2, 3)]}, "densities": [0, 0, 0]}
        with pytest.raises(ScenarioError, match="outflow_green"):
            parse_scenario(doc)

    def test_per_approach_auto_level(self):
        scenario = parse_scenario({"densities": [10, 100, 200]})
        # approach 1 is Low (scaled by 0.5), approach 3 High (scaled by 1.5)
        assert scenario.junction.approach(1).outflow_green.to_list() == [5, 8]
        assert scenario.junction.approach(3).outflow_green.to_list() == [33, 59]


class TestDecide:
    def test_report(self):
        code, out = cli("decide", "--scenario", MEDIUM)
        assert code == 0
        assert "Signal 4: Left, Right, Straight and Signal 3: Left are green\n" in out
        assert out.endswith("Green Time for signal 4: 30 seconds\n")

    def test_missing_file(self, tmp_path, capsys):
        code, _ = cli("decide", "--scenario", tmp_path / "nope.json")
        assert code == 2 and "cannot read scenario" in capsys.readouterr().err


class TestValidate:
    def test_ok(self):
        assert cli("validate", "--scenario", EXPLICIT) == (0, "ok: 4 approaches\n")

    def test_rejection_exit_1(self, tmp_path, capsys):
        doc = json.loads(EXPLICIT.read_text())
        doc["junction"]["approaches"][1]["inflow"] = [15, 3]
        code, _ = cli("validate", "--scenario", write_scenario(tmp_path, doc))
        assert code == 1 and "approach 2: inflow" in capsys.readouterr().err

    def test_schema_error_exit_2(self, tmp_path, capsys):
        code, _ = cli("validate", "--scenario", write_scenario(tmp_path, {"densities": [1, 2, 3], "colour": 1}))
        assert code == 2 and "colour" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert cli("validate", "--scenario", path)[0] == 2

    def test_bad_override(self):
        assert cli("validate", "--scenario", MEDIUM, "--horizon", "-5")[0] == 1


class TestSimulate:
    def test_stdout_csv(self):
        code, out = cli("simulate", "--scenario", MEDIUM, "--horizon", 300, "--controller", "static")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and rows[3]["approach_id"] == "4" and rows[0]["indication"] == "GREEN"

    def test_out_dir(self, tmp_path):
        code, out = cli("simulate", "--scenario", MEDIUM, "--out", tmp_path)
        assert code == 0 and out.startswith("dynamic:")
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["chosen_sequence"][:2] == [4, 3]
        assert (tmp_path / "trace.csv").read_bytes().count(b"\r") == 0

    def test_repeatable(self, tmp_path):
        for name in ("a", "b"):
            cli("simulate", "--scenario", EXPLICIT, "--out", tmp_path / name)
        assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()

    def test_seed_override(self):
        _, a = cli("simulate", "--scenario", EXPLICIT, "--seed", 1)
        _, b = cli("simulate", "--scenario", EXPLICIT, "--seed", 2)
        assert a != b


class TestCompare:
    def test_identical_inputs(self, tmp_path):
        code, out = cli("compare", "--scenario", EXPLICIT, "--out", tmp_path)
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        dyn, sta = summary["dynamic"]["header"], summary["static"]["header"]
        for key in ("seed", "sampler", "junction", "densities", "horizon", "timeline"):
            assert dyn[key] == sta[key]
        assert dyn["controller"] == "dynamic" and sta["controller"] == "static"
        assert set(summary["improvement_pct"]) == {"average_wait", "max_wait", "density"}
        assert (tmp_path / "dynamic.csv").exists() and (tmp_path / "static.csv").exists()
        assert "max_wait reduction:" in out

    def test_improvement_matches_summaries(self, tmp_path):
        cli("compare", "--scenario", MEDIUM, "--out", tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        d = summary["dynamic"]["wait_stats"]["overall"]["mean_density"]
        s = summary["static"]["wait_stats"]["overall"]["mean_density"]
        assert summary["improvement_pct"]["density"] == pytest.approx((s - d) / s * 100)


class TestIngest:
    def test_signal_out_of_range(self, tmp_path, capsys):
        lines = "\n".join(json.dumps({**EMERGENCY, **c}) for c in ({}, {"alert_no": 2, "signal": 9}))
        code, out = cli("ingest", "--kind", "emergency", "--store", tmp_path / "e.jsonl", "--scenario", MEDIUM,
                        stdin=lines)
        assert code == 1 and out == "accepted 1, rejected 1, duplicates 0\n"
        assert "signal out of range: 9" in capsys.readouterr().err

    def test_reingest_is_noop(self, tmp_path):
        src = tmp_path / "in.jsonl"
        src.write_text(json.dumps(ACCIDENT) + "\n")
        store = tmp_path / "a.jsonl"
        assert cli("ingest", "--kind", "accident", "--store", store, src)[1] == "accepted 1, rejected 0, duplicates 0\n"
        before = store.read_bytes()
        assert cli("ingest", "--kind", "accident", "--store", store, src) == (0, "accepted 0, rejected 0, duplicates 1\n")
        assert store.read_bytes() == before

    def test_missing_input(self, tmp_path):
        assert cli("ingest", "--kind", "accident", "--store", tmp_path / "a.jsonl", tmp_path / "none")[0] == 2


class TestTimelineScenario:
    def scenario(self, tmp_path, bindings=True):
        cli("ingest", "--kind", "emergency", "--store", tmp_path / "e.jsonl", stdin=json.dumps(EMERGENCY))
        cli("ingest", "--kind", "accident", "--store", tmp_path / "a.jsonl", stdin=json.dumps(ACCIDENT))
        doc = json.loads(MEDIUM.read_text())
        doc["timeline"] = {"emergencies": "e.jsonl", "accidents": "a.jsonl"}
        if bindings:
            doc["timeline"]["accident_bindings"] = {"77": {"approach": 4, "start": 0}}
        return write_scenario(tmp_path, doc)

    def test_events_shape_the_run(self, tmp_path):
        path = self.scenario(tmp_path)
        code, _ = cli("simulate", "--scenario", path, "--out", tmp_path / "out")
        assert code == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        emergency = summary["cause_sequence"].index("Emergency")
        assert summary["chosen_sequence"][emergency] == 2
        assert len(summary["header"]["timeline"]) == 2

    def test_unbound_accident_is_a_rejection(self, tmp_path, capsys):
        path = self.scenario(tmp_path, bindings=False)
        assert cli("validate", "--scenario", path)[0] == 1
        assert "no approach binding" in capsys.readouterr().err
