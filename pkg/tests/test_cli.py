#!/usr/bin/env python3
"""
Tests for the matchlab command line
"""

import csv
import json
import os

import pytest
from dotenv import load_dotenv

from matchlab import EXIT_CONFIG, EXIT_OK, build_parser, main, overrides_from_args


load_dotenv()


def read_manifest(out_dir) -> dict:
    with open(os.path.join(out_dir, "manifest.json")) as f:
        return json.load(f)


def csv_digests(manifest: dict) -> list[str]:
    return [out["sha256_masked"] for out in manifest["outputs"] if out["kind"] == "csv"]


class TestCommandLine:
    """Test suite for subcommands, exit codes and reproducibility"""

    def test_parser_overrides(self):
        """Flags map onto config keys; absent flags stay None"""
        args = build_parser().parse_args(["cost-rate", "--n", "64,256", "--threads", "2"])
        overrides = overrides_from_args(args)
        assert overrides["n_list"] == [64, 256]
        assert overrides["threads"] == 2
        assert overrides["seed"] is None
        assert overrides["keep_replicas"] is None

    def test_bad_n_list(self):
        """Malformed sample sizes are rejected by the parser"""
        with pytest.raises(SystemExit) as info:
            main(["cost-rate", "--n", "64,abc"])
        assert info.value.code == 2

    def test_trace_check(self, tmp_path):
        """trace-check passes and records its fits and checks"""
        code = main(["trace-check", "--replicas", "20", "--out", str(tmp_path), "--quiet"])
        manifest = read_manifest(tmp_path)
        print(f"\nChecks: {[(c['check'], c['passed']) for c in manifest['checks']]}")
        assert code == EXIT_OK
        assert manifest["exit_status"] == {"trace-check": 0}
        assert {fit["name"] for fit in manifest["fits"]} == {"q_2t_0", "q_2t_0_minus_2t"}

    def test_kernel_selfcheck(self, tmp_path):
        """kernel-selfcheck exits 0 with every check passing and the report table written"""
        code = main(["kernel-selfcheck", "--out", str(tmp_path), "--quiet"])
        manifest = read_manifest(tmp_path)
        failed = [c["check"] for c in manifest["checks"] if not c["passed"]]
        assert not failed, f"Failing checks: {failed}"
        assert code == EXIT_OK
        assert manifest["exit_status"] == {"kernel-selfcheck": 0}
        assert [out["rows"] for out in manifest["outputs"] if out["kind"] == "csv"] == [4]

    def test_change_time_pairs_table(self, tmp_path):
        """change-time writes an (n, s, t) table next to the estimator CSV"""
        code = main(
            ["change-time", "--n", "128", "--replicas", "2", "--grid-m", "32", "--out", str(tmp_path), "--quiet"]
        )
        manifest = read_manifest(tmp_path)
        assert code in (0, 1)
        tables = [out["path"] for out in manifest["outputs"] if "change_time_pairs" in out["path"]]
        assert len(tables) == 1
        with open(tables[0], newline="") as f:
            rows = list(csv.DictReader(f))
        assert [float(row["s"]) for row in rows] == [1.0 / 128] * 2
        assert [float(row["t"]) for row in rows] == [4.0 / 128, 64.0 / 128]
        assert all("np." not in value for row in rows for value in row.values())

    def test_unknown_config_key(self, tmp_path):
        """A config file with an unknown key exits with status 2"""
        config = tmp_path / "bad.conf"
        config.write_text("replica = 3\n")
        assert main(["cost-rate", "--config", str(config), "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG

    def test_invalid_grid(self, tmp_path):
        """Grids below 16 pixels per side are configuration errors"""
        assert main(["cost-rate", "--grid-m", "8", "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG

    def test_single_point_cost_rate(self, tmp_path):
        """cost-rate at n = 1 checks the analytic cost and skips the fit"""
        code = main(["cost-rate", "--n", "1", "--replicas", "2", "--out", str(tmp_path), "--quiet"])
        manifest = read_manifest(tmp_path)
        assert code == EXIT_OK
        assert [check["check"] for check in manifest["checks"]] == ["single_point_cost"]
        assert manifest["fits"] == []

    def test_argument_error_exit_code(self, tmp_path):
        """kernel-comparison at n = 8 needs t = 1/8 > 1/16 and exits with status 2"""
        code = main(["kernel-comparison", "--n", "8", "--replicas", "2", "--out", str(tmp_path), "--quiet"])
        manifest = read_manifest(tmp_path)
        assert code == EXIT_CONFIG
        assert manifest["errors"][0]["type"] == "InvalidArgumentError"
        assert manifest["exit_status"] == {"kernel-comparison": EXIT_CONFIG}

    def test_deterministic_across_threads(self, tmp_path):
        """Same config and seed give identical CSV bodies for any --threads"""
        digests = []
        for threads in ("1", "3"):
            out = tmp_path / f"threads{threads}"
            code = main(
                [
                    "cost-rate",
                    "--n", "4,8,16",
                    "--replicas", "3",
                    "--seed", "99",
                    "--threads", threads,
                    "--out", str(out),
                    "--quiet",
                ]
            )
            assert code in (0, 1)
            digests.append(csv_digests(read_manifest(out)))
        assert digests[0] == digests[1]
        assert digests[0], "No CSV output recorded"
