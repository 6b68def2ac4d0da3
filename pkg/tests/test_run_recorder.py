#!/usr/bin/env python3
"""
Tests for result files and the run manifest
"""

import csv
import json

from dotenv import load_dotenv

from models.errors import ConfigError, ConvergenceError
from models.types import CSV_FIELDS, CheckResult, EstimatorRecord, RateFit
from run_recorder import RunRecorder, csv_digest, masked_csv_body


load_dotenv()


def make_record(n: int, runtime: float) -> EstimatorRecord:
    return EstimatorRecord(
        quantity="cost",
        n=n,
        t=None,
        m=128,
        R=3,
        mean=0.25,
        stderr=0.01,
        seed=5,
        runtime_seconds=runtime,
        replica_values=(0.2, 0.25, 0.3),
    )


class TestRunRecorder:
    """Test suite for CSV/JSONL output and manifests"""

    def setup_method(self):
        """Set up test fixtures"""
        self.config = {"seed": 5, "replicas": 3}

    def test_csv_schema(self, tmp_path):
        """CSV files use the fixed column order and render t = None as empty"""
        recorder = RunRecorder(str(tmp_path), seed=5, config=self.config, quiet=True)
        path = recorder.write_records("cost", [make_record(64, 1.5)], "cost-rate")
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0].keys()) == CSV_FIELDS
        assert rows[0]["t"] == ""
        assert rows[0]["mean"] == "0.25"
        assert rows[0]["runtime_seconds"] == "1.500"

    def test_jsonl_echoes_config(self, tmp_path):
        """Every JSONL line carries the config; replica values only on request"""
        recorder = RunRecorder(str(tmp_path), seed=5, config=self.config, keep_replicas=True, quiet=True)
        recorder.write_records("cost", [make_record(64, 0.1)], "cost-rate")
        jsonl = [out.path for out in recorder.manifest.outputs if out.kind == "jsonl"][0]
        entry = json.loads(open(jsonl).read().splitlines()[0])
        assert entry["config"] == self.config
        assert entry["replica_values"] == [0.2, 0.25, 0.3]
        assert EstimatorRecord.from_dict(entry).replica_values == (0.2, 0.25, 0.3)

    def test_digest_ignores_runtime(self, tmp_path):
        """Masked digests agree when only wall-clock columns differ"""
        first = RunRecorder(str(tmp_path / "a"), seed=5, config=self.config, quiet=True)
        second = RunRecorder(str(tmp_path / "b"), seed=5, config=self.config, quiet=True)
        path_a = first.write_records("cost", [make_record(64, 1.0)], "cost-rate")
        path_b = second.write_records("cost", [make_record(64, 9.0)], "cost-rate")
        assert csv_digest(path_a) == csv_digest(path_b)
        assert open(path_a).read() != open(path_b).read()

    def test_masked_body(self):
        """Only the runtime column is blanked"""
        text = "quantity,n,runtime_seconds\ncost,64,1.234\n"
        assert masked_csv_body(text) == "quantity,n,runtime_seconds\ncost,64,\n"
        assert masked_csv_body("") == ""

    def test_manifest(self, tmp_path):
        """Checks, fits, errors and exit codes end up in manifest.json"""
        recorder = RunRecorder(str(tmp_path), seed=5, config=self.config, quiet=True)
        passed = recorder.record_checks(
            "cost-rate",
            [
                CheckResult(name="cost_slope", value=0.02, tolerance=0.1, passed=True),
                CheckResult(name="cost_residual_band", value=2.0, tolerance=1.5, passed=False),
            ],
        )
        assert not passed
        recorder.record_fit("cost-rate", "cost", RateFit(slope=0.08, intercept=0.1, residuals=(0.0, 0.1, -0.1)))
        recorder.record_error("displacement", ConvergenceError("stalled", seed=5, replica=3))
        recorder.record_error("config", ConfigError("bad value", key="replicas"))
        recorder.finish_subcommand("cost-rate", 1)
        path = recorder.write_manifest()

        manifest = json.loads(open(path).read())
        assert manifest["exit_status"] == {"cost-rate": 1}
        assert [check["check"] for check in manifest["checks"]] == ["cost_slope", "cost_residual_band"]
        assert manifest["fits"][0]["slope"] == 0.08
        assert manifest["errors"][0]["replica"] == 3
        assert manifest["errors"][1]["key"] == "replicas"
        assert manifest["finished_at"] is not None

    def test_table(self, tmp_path):
        """Deterministic tables get a digest in the manifest"""
        recorder = RunRecorder(str(tmp_path), seed=5, config=self.config, quiet=True)
        recorder.write_table("trace", ["t", "q_2t_0"], [{"t": "0.1", "q_2t_0": "0.2"}], "trace-check")
        output = recorder.manifest.outputs[0]
        assert output.rows == 1
        assert output.sha256_masked is not None

    def test_earlier_time_field(self, tmp_path):
        """Two-time records carry s in JSONL; single-time records omit it"""
        recorder = RunRecorder(str(tmp_path), seed=5, config=self.config, quiet=True)
        paired = make_record(64, 0.1)._replace(quantity="change_time", t=0.0625, s=0.015625)
        recorder.write_records("change_time", [paired, make_record(128, 0.1)], "change-time")
        jsonl = [out.path for out in recorder.manifest.outputs if out.kind == "jsonl"][0]
        entries = [json.loads(line) for line in open(jsonl).read().splitlines()]
        assert entries[0]["s"] == 0.015625
        assert "s" not in entries[1]
        assert EstimatorRecord.from_dict(entries[0]).s == 0.015625
        assert EstimatorRecord.from_dict(entries[1]).s is None
        csv_path = [out.path for out in recorder.manifest.outputs if out.kind == "csv"][0]
        with open(csv_path, newline="") as f:
            assert list(csv.DictReader(f).fieldnames) == CSV_FIELDS
