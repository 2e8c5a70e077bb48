"""End-to-end command-line workflows and exit codes."""

import csv
import json

import pytest

from odscale.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def generate(capsys, out, **extra):
    argv = ["generate", "--out", str(out), "--seed", "3",
            "--segments", "20", "--ods", "8", "--path-len", "2", "5"]
    for flag, value in extra.items():
        argv += [f"--{flag.replace('_', '-')}", str(value)]
    code, _, _ = run(capsys, *argv)
    assert code == 0
    return out


class TestGenerate:
    def test_writes_discoverable_scenario(self, tmp_path, capsys):
        generate(capsys, tmp_path / "scen")
        assert (tmp_path / "scen" / "segments.csv").is_file()
        assert (tmp_path / "scen" / "hours" / "h00" / "od.csv").is_file()
        manifest = json.loads((tmp_path / "scen" / "manifest.json").read_text())
        assert manifest["seed"] == 3

    def test_infeasible_request_exits_one(self, tmp_path, capsys):
        code, _, err = run(capsys, "generate", "--out", str(tmp_path),
                           "--segments", "10", "--path-len", "50", "60")
        assert code == 1
        assert err.startswith("error:")


class TestEstimate:
    def test_full_round_trip(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen", true_x=6.5)
        code, out, err = run(capsys, "estimate", "--network-dir", str(scen),
                             "--out", str(tmp_path / "rep"))
        assert code == 0 and err == ""
        assert "hour h00: x_star=6.5" in out
        assert "converged=True" in out
        assert f"reports written to {tmp_path / 'rep'}" in out
        with open(tmp_path / "rep" / "estimate.csv", newline="") as fh:
            (row,) = csv.DictReader(fh)
        assert abs(float(row["x_star"]) - 6.5) < 1e-3

    def test_hour_filter(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen", hour="h07")
        generate(capsys, tmp_path / "scen", hour="h08")
        code, out, _ = run(capsys, "estimate", "--network-dir", str(scen),
                           "--hour", "h08", "--out", str(tmp_path / "rep"))
        assert code == 0
        assert "hour h08:" in out and "hour h07:" not in out

    def test_corrupt_hour_exits_one(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen")
        (scen / "hours" / "h00" / "gt_travel_times.csv").write_text(
            "path_id,tt_s,weight\nghost,10.0,\n")
        code, _, err = run(capsys, "estimate", "--network-dir", str(scen),
                           "--out", str(tmp_path / "rep"))
        assert code == 1
        assert "hour h00: FAILED" in err

    def test_missing_scenario_exits_one(self, tmp_path, capsys):
        code, _, err = run(capsys, "estimate",
                           "--network-dir", str(tmp_path / "nope"),
                           "--out", str(tmp_path / "rep"))
        assert code == 1
        assert err.startswith("error:")


class TestGridSearchAndCompare:
    def test_grid_search(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen")
        code, out, _ = run(capsys, "grid-search", "--network-dir", str(scen),
                           "--grid-points", "5001",
                           "--out", str(tmp_path / "rep"))
        assert code == 0
        assert "x_benchmark=" in out and "(5001 points)" in out
        assert (tmp_path / "rep" / "hours" / "h00" / "grid_curve.csv").is_file()

    def test_compare_prints_table(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen")
        code, out, _ = run(capsys, "compare", "--network-dir", str(scen),
                           "--grid-points", "5001",
                           "--out", str(tmp_path / "rep"))
        assert code == 0
        lines = out.splitlines()
        assert lines[0].split() == ["hour", "baseline", "benchmark",
                                    "proposed", "improvement%", "gap%"]
        assert lines[1].split()[0] == "h00"
        assert lines[1].split()[5] == "0"  # noiseless: gap 0
        assert (tmp_path / "rep" / "travel_time_scatter.csv").is_file()
        assert (tmp_path / "rep" / "travel_time_cdf.csv").is_file()


class TestValidateCounts:
    def test_validation_written_per_hour(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen", sensors=6)
        code, out, err = run(capsys, "validate-counts",
                             "--network-dir", str(scen),
                             "--out", str(tmp_path / "rep"))
        assert code == 0 and err == ""
        assert "validation written to" in out
        summary = json.loads(
            (tmp_path / "rep" / "hours" / "h00" /
             "counts_validation.json").read_text())
        assert summary["sensors"] == 6
        assert summary["count_nrmse_proposed_pct"] < 1e-3

    def test_without_sensor_file_exits_one(self, tmp_path, capsys):
        scen = generate(capsys, tmp_path / "scen")
        code, _, err = run(capsys, "validate-counts",
                           "--network-dir", str(scen),
                           "--out", str(tmp_path / "rep"))
        assert code == 1
        assert "no hour provides a sensors file" in err


class TestUsageErrors:
    def test_no_command_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_command_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_two(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--out", str(tmp_path)])
        assert exc.value.code == 2
