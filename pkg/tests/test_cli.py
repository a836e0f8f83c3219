import csv
import json
import os

import pytest

from miqes.cli import main


def test_run_oracle_summarize_pipeline(tmp_path):
    out_dir = str(tmp_path / "out")
    fixtures = str(tmp_path / "fix.json")
    assert main(["run", "--test-case", "TC0", "--dim", "4", "--cond", "10",
                 "--level", "30", "--seeds", "2", "--budget", "500",
                 "--out", out_dir]) == 0
    records_path = os.path.join(out_dir, "records.csv")
    with open(records_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4  # 2 solvers x 2 seeds
    assert {r["solver"] for r in rows} == {"mies", "cma_ih"}

    assert main(["oracle", "--test-case", "TC0", "--dim", "4", "--cond", "10",
                 "--level", "30", "--fixtures", fixtures]) == 0
    with open(fixtures) as fh:
        fix = json.load(fh)
    assert len(fix) == 1

    summary_path = str(tmp_path / "summary.csv")
    assert main(["summarize", "--records", records_path, "--fixtures", fixtures,
                 "--out", summary_path]) == 0
    with open(summary_path) as fh:
        summary = list(csv.DictReader(fh))
    assert len(summary) == 2
    assert all(r["normalization"] == "oracle" for r in summary)


def test_run_with_traces(tmp_path):
    out_dir = str(tmp_path / "traced")
    assert main(["run", "--test-case", "TC0", "--dim", "4", "--cond", "10",
                 "--level", "30", "--seeds", "1", "--budget", "300",
                 "--solver", "cma_ih", "--trace", "--out", out_dir]) == 0
    trace_dir = os.path.join(out_dir, "traces")
    files = os.listdir(trace_dir)
    assert len(files) == 1
    with open(os.path.join(trace_dir, files[0])) as fh:
        header = fh.readline().strip().split(",")
    assert header == ["generation", "evaluations", "best_cost", "sigma", "min_int_std"]


def test_config_file_overrides_flags(tmp_path):
    config_path = str(tmp_path / "config.json")
    with open(config_path, "w") as fh:
        json.dump({"test_cases": ["TC1"], "dims": [4], "conditions": [100.0],
                   "levels": [10.0], "solvers": ["mies"], "seeds": 1,
                   "budget": 200}, fh)
    out_dir = str(tmp_path / "out")
    # flags say TC0 with 3 seeds; the file must win
    assert main(["run", "--test-case", "TC0", "--seeds", "3",
                 "--config", config_path, "--out", out_dir]) == 0
    with open(os.path.join(out_dir, "records.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["test_case"] == "TC1"


def test_dist_test_passes():
    assert main(["dist-test", "--samples", "50000", "--p", "0.3,0.7"]) == 0


def test_bench_runs():
    assert main(["bench", "--repeats", "3", "--budget", "2000"]) == 0


def test_unknown_solver_rejected(tmp_path):
    with pytest.raises(ValueError):
        main(["run", "--test-case", "TC0", "--dim", "4", "--cond", "10",
              "--level", "30", "--seeds", "1", "--budget", "100",
              "--solver", "annealing", "--out", str(tmp_path / "x")])
