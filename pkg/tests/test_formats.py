import json

import numpy as np
import pytest

from helpers import drift_samples

from eyesim.engine import TraceInputSource, run_trial
from eyesim.formats import (
    ScenarioError,
    TraceError,
    build_world,
    default_scenario,
    load_scenario,
    parse_trace,
    read_trial_csv,
    run_hash,
    scenario_from_dict,
    scenario_hash,
    trace_header,
    trial_csv_bytes,
    write_trace,
    write_trial_csv,
)


def write_scenario(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestScenarioLoading:
    def test_minimal_file_fills_defaults(self, tmp_path):
        sc = load_scenario(write_scenario(tmp_path, {}))
        assert sc.dt == 0.001
        assert sc.mode == "BMAT"
        assert sc.seed == 0
        assert sc.configs["right"].role == "dominant"
        assert sc.configs["left"].port_index == 1
        assert sc.raw["scene"]["radius"] == 0.012

    def test_loading_is_pure(self, tmp_path):
        p = write_scenario(tmp_path, {"seed": 3})
        a, b = load_scenario(p), load_scenario(p)
        assert a.raw == b.raw
        assert scenario_hash(a) == scenario_hash(b)

    def test_override_survives(self, tmp_path):
        sc = load_scenario(
            write_scenario(tmp_path, {"scene": {"sclera_stiffness": 250.0}, "dt": 0.002})
        )
        assert sc.scene.sclera_stiffness == 250.0
        assert sc.dt == 0.002
        assert sc.scene.radius == 0.012  # untouched default

    def test_negative_radius_names_json_path(self, tmp_path):
        with pytest.raises(ScenarioError, match=r"\$\.scene\.radius"):
            load_scenario(write_scenario(tmp_path, {"scene": {"radius": -1.0}}))

    def test_kappa_must_have_six_entries(self, tmp_path):
        with pytest.raises(ScenarioError, match=r"\$\.robots\.right\.scaling"):
            load_scenario(
                write_scenario(tmp_path, {"robots": {"right": {"scaling": [1, 1, 1, 1, 1]}}})
            )

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="frobnicate"):
            load_scenario(write_scenario(tmp_path, {"frobnicate": 1}))

    def test_duplicate_ports_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="distinct ports"):
            load_scenario(write_scenario(tmp_path, {"robots": {"left": {"port": 0}}}))

    def test_two_dominant_hands_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="dominant"):
            load_scenario(write_scenario(tmp_path, {"robots": {"left": {"role": "dominant"}}}))

    def test_initial_theta_outside_limits(self, tmp_path):
        with pytest.raises(ScenarioError, match="initial_theta"):
            load_scenario(
                write_scenario(
                    tmp_path, {"robots": {"right": {"initial_theta": [1.0, 0, 0, 0, 0]}}}
                )
            )

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="not found"):
            load_scenario(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ScenarioError, match="invalid JSON"):
            load_scenario(p)

    def test_default_document_is_schema_valid(self):
        sc = scenario_from_dict(default_scenario())
        assert sc.raw == scenario_from_dict({}).raw


class TestTraceIO:
    def test_two_line_trace(self, tmp_path):
        p = tmp_path / "t.csv"
        write_trace(drift_samples(duration=0.1, interval=0.1), p, "BMAT")
        samples = parse_trace(p, "BMAT")
        assert len(samples) == 2
        assert samples[0].t == 0.0 and samples[1].t == 0.1

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        from eyesim.engine import InputSample, RobotInput

        samples = [
            InputSample(
                t=float(i) * 0.01 + rng.random() * 1e-3,
                right=RobotInput(rng.normal(size=6), pedal=float(rng.random()), clutch=1),
                left=RobotInput(rng.normal(size=6), pedal=float(rng.random()), clutch=0),
            )
            for i in range(20)
        ]
        p = tmp_path / "rt.csv"
        write_trace(samples, p, "BMAT")
        parsed = parse_trace(p, "BMAT")
        for orig, back in zip(samples, parsed):
            assert abs(orig.t - back.t) < 1e-12
            np.testing.assert_allclose(back.right.command, orig.right.command, atol=1e-12)
            np.testing.assert_allclose(back.left.command, orig.left.command, atol=1e-12)
            assert abs(back.right.pedal - orig.right.pedal) < 1e-12

    def test_non_monotone_timestamps_name_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        header = ",".join(trace_header("BMAT"))
        row = ",".join(["0.2"] + ["0"] * 16)
        row2 = ",".join(["0.1"] + ["0"] * 16)
        p.write_text(f"{header}\n{row}\n{row2}\n")
        with pytest.raises(TraceError, match="line 3"):
            parse_trace(p, "BMAT")

    def test_nan_field_rejected(self, tmp_path):
        p = tmp_path / "nan.csv"
        header = ",".join(trace_header("BMAT"))
        row = ",".join(["0.0", "nan"] + ["0"] * 15)
        p.write_text(f"{header}\n{row}\n")
        with pytest.raises(TraceError, match="non-finite"):
            parse_trace(p, "BMAT")

    def test_wrong_header(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("time,stuff\n")
        with pytest.raises(TraceError, match="header"):
            parse_trace(p, "BMAT")

    def test_bmac_header_uses_wrench_names(self):
        cols = trace_header("BMAC")
        assert "r_fx" in cols and "r_tz" in cols and "r_vx" not in cols


class TestTrialCsv:
    def make_log(self, duration=0.2, seed=0):
        sc = scenario_from_dict({"seed": seed})
        world = build_world(sc)
        return run_trial(world, TraceInputSource(drift_samples(duration=duration)), 1.0)

    def test_empty_log_header_only(self, tmp_path):
        from eyesim.engine import TrialLog

        log = TrialLog(records=[], meta={"mode": "BMAT", "seed": 0, "dt": 0.001})
        p = tmp_path / "empty.csv"
        write_trial_csv(log, p)
        lines = p.read_text().splitlines()
        assert lines[0].startswith("# mode=")
        assert lines[-1].startswith("t,r_th0")
        assert len([ln for ln in lines if not ln.startswith("#")]) == 1

    def test_identical_logs_identical_bytes(self, tmp_path):
        a, b = self.make_log(), self.make_log()
        assert trial_csv_bytes(a) == trial_csv_bytes(b)

    def test_round_trip_to_printed_precision(self, tmp_path):
        log = self.make_log()
        p = tmp_path / "trial.csv"
        write_trial_csv(log, p)
        back = read_trial_csv(p)
        assert back.meta["mode"] == log.meta["mode"]
        assert back.meta["dt"] == log.meta["dt"]
        assert len(back.records) == len(log.records)
        for orig, parsed in zip(log.records, back.records):
            assert parsed.t == float(f"{orig.t:.9g}")
            for side in ("right", "left"):
                o, q = orig.robots[side], parsed.robots[side]
                for key in ("fsx", "fsy", "fs", "ft", "depth", "pedal"):
                    assert q[key] == float(f"{o[key]:.9g}")
                assert q["delta_x"] == o["delta_x"]
                np.testing.assert_array_equal(
                    q["theta"], np.array([float(f"{v:.9g}") for v in o["theta"]])
                )

    def test_events_round_trip(self, tmp_path):
        from eyesim.engine import TickRecord, TrialLog

        log = self.make_log(duration=0.1)
        log.records[2] = TickRecord(
            t=log.records[2].t, robots=log.records[2].robots, events=("pin:red", "vessel:red")
        )
        p = tmp_path / "ev.csv"
        write_trial_csv(log, p)
        back = read_trial_csv(p)
        assert back.records[2].events == ("pin:red", "vessel:red")
        assert back.records[1].events == ()


class TestHashes:
    def test_run_hash_sensitivity(self):
        sc = scenario_from_dict({})
        h1 = run_hash(sc, b"trace", 0, 0.001)
        assert h1 == run_hash(sc, b"trace", 0, 0.001)
        assert h1 != run_hash(sc, b"trace", 1, 0.001)
        assert h1 != run_hash(sc, b"other", 0, 0.001)
        sc2 = scenario_from_dict({"dt": 0.002})
        assert h1 != run_hash(sc2, b"trace", 0, 0.001)
