"""Command line behavior: output shapes, exit codes, reproducibility."""

from __future__ import annotations

import json
import math

import pytest

from gridloc.cli import EXIT_ERROR, EXIT_NO_FIX, EXIT_OK, main


def write_reports(path, blind, beacons, a_dbm=-45.0, n=2.0, header=True):
    lines = ["beacon_x,beacon_y,avg_rssi_dbm,sample_count"] if header else []
    for bx, by in beacons:
        d = math.hypot(blind[0] - bx, blind[1] - by)
        rss = a_dbm - 10.0 * n * math.log10(d)
        lines.append(f"{bx},{by},{rss!r},8")
    path.write_text("\n".join(lines) + "\n")


GRID_3X3 = [(x, y) for y in (0.0, 4.0, 8.0) for x in (0.0, 4.0, 8.0)]


def write_scenario(path, **overrides):
    doc = {
        "seed": 7,
        "channel": {"sigma_dbm": 2.0},
        "trajectory": {"kind": "static", "point": [1.3, 2.6]},
        "rounds": 9,
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc))


class TestLocate:
    def test_refined_fix_prints_fields(self, tmp_path, capsys):
        reports = tmp_path / "reports.csv"
        write_reports(reports, (1.0, 1.0), GRID_3X3)
        assert main(["locate", str(reports)]) == EXIT_OK
        fields = capsys.readouterr().out.strip().split(",")
        assert float(fields[0]) == pytest.approx(1.0, abs=1e-9)
        assert float(fields[1]) == pytest.approx(1.0, abs=1e-9)
        assert fields[2:] == ["refined", "0", "0", "2"]

    def test_header_is_optional(self, tmp_path, capsys):
        reports = tmp_path / "reports.csv"
        write_reports(reports, (1.0, 1.0), GRID_3X3, header=False)
        assert main(["locate", str(reports)]) == EXIT_OK
        assert capsys.readouterr().out.split(",")[2] == "refined"

    def test_custom_lattice_flags(self, tmp_path, capsys):
        beacons = [(10 + 2 * i, 5 + 2 * j) for j in range(3) for i in range(3)]
        reports = tmp_path / "reports.csv"
        write_reports(reports, (10.6, 5.7), beacons)
        code = main(["locate", str(reports), "--origin", "10,5",
                     "--spacing", "2", "--cols", "3", "--rows", "3"])
        assert code == EXIT_OK
        fields = capsys.readouterr().out.strip().split(",")
        assert float(fields[0]) == pytest.approx(10.6, abs=1e-9)
        assert float(fields[1]) == pytest.approx(5.7, abs=1e-9)

    def test_three_reports_exit_no_fix(self, tmp_path, capsys):
        reports = tmp_path / "reports.csv"
        write_reports(reports, (1.0, 1.0), GRID_3X3[:3])
        assert main(["locate", str(reports)]) == EXIT_NO_FIX
        assert capsys.readouterr().out.strip() == ",,no_fix,,,2"

    def test_malformed_row_names_line(self, tmp_path, capsys):
        reports = tmp_path / "reports.csv"
        reports.write_text("beacon_x,beacon_y,avg_rssi_dbm,sample_count\n"
                           "0,0,-50.0,8\n"
                           "4,nope,-50.0,8\n")
        assert main(["locate", str(reports)]) == EXIT_ERROR
        assert "line 3" in capsys.readouterr().err

    def test_wrong_field_count_rejected(self, tmp_path, capsys):
        reports = tmp_path / "reports.csv"
        reports.write_text("0,0,-50.0\n")
        assert main(["locate", str(reports)]) == EXIT_ERROR
        assert "line 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["locate", str(tmp_path / "absent.csv")]) == EXIT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_bad_origin_flag(self, tmp_path, capsys):
        reports = tmp_path / "reports.csv"
        write_reports(reports, (1.0, 1.0), GRID_3X3)
        assert main(["locate", str(reports), "--origin", "oops"]) == EXIT_ERROR
        assert "--origin" in capsys.readouterr().err


class TestSimulate:
    def test_static_run_writes_outputs(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        out = tmp_path / "out"
        assert main(["simulate", str(scenario), "--out", str(out)]) == EXIT_OK
        assert (out / "records.csv").exists()
        assert (out / "buckets.csv").exists()
        assert not (out / "surface.csv").exists()
        assert not (out / "trace.txt").exists()
        stdout = capsys.readouterr().out
        assert stdout.startswith("simulate: records=9 ")
        assert "median_error_m=" in stdout and "no_fix=0" in stdout

    def test_trace_flag_writes_trace(self, tmp_path):
        scenario = tmp_path / "s.json"
        write_scenario(scenario, rounds=1)
        out = tmp_path / "out"
        assert main(["simulate", str(scenario), "--trace",
                     "--out", str(out)]) == EXIT_OK
        lines = (out / "trace.txt").read_text().splitlines()
        assert lines[0].endswith("location_start,m0")
        # Broadcasts appear once; per-beacon replies appear per beacon.
        assert sum(",rssi_test," in ln for ln in lines) == 8
        assert sum(",ack," in ln for ln in lines) == 9
        assert sum(",rssi_avg_response," in ln for ln in lines) == 9

    def test_seed_override_is_reproducible(self, tmp_path):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["simulate", str(scenario), "--seed", "123",
                         "--out", str(out)]) == EXIT_OK
            outs.append((out / "records.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_seed_override_changes_noise(self, tmp_path):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", str(scenario), "--seed", "1", "--out", str(a)])
        main(["simulate", str(scenario), "--seed", "2", "--out", str(b)])
        assert (a / "records.csv").read_bytes() != (b / "records.csv").read_bytes()

    def test_bundled_sweep_writes_surface(self, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "paper_sweep", "--out", str(out)]) == EXIT_OK
        records = (out / "records.csv").read_text().splitlines()
        assert len(records) == 626
        surface = (out / "surface.csv").read_text()
        assert surface.count("\n\n") == 24

    def test_custom_bucket_edges(self, tmp_path):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        out = tmp_path / "out"
        assert main(["simulate", str(scenario), "--buckets", "1.0,2.0",
                     "--out", str(out)]) == EXIT_OK
        lines = (out / "buckets.csv").read_text().splitlines()
        assert lines[0] == "edge_lo,edge_hi,count,fraction"
        assert len(lines) == 4  # [0,1), [1,2), [2,inf)

    def test_invalid_scenario_file(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        scenario.write_text('{"trajectory": {"kind": "orbit"}}')
        assert main(["simulate", str(scenario)]) == EXIT_ERROR
        assert "trajectory.kind" in capsys.readouterr().err

    def test_unknown_bundled_name(self, capsys):
        assert main(["simulate", "no_such_scenario"]) == EXIT_ERROR
        assert "no_such_scenario" in capsys.readouterr().err


class TestSweep:
    def test_sigma_sweep_outputs(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        out = tmp_path / "out"
        code = main(["sweep", str(scenario), "--vary", "sigma=0,2",
                     "--out", str(out)])
        assert code == EXIT_OK
        for tag in ("0", "2"):
            assert (out / f"records_sigma_{tag}.csv").exists()
            assert (out / f"baseline_sigma_{tag}.csv").exists()
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0] == ("vary_key,value,system,records,no_fix,median_error_m,"
                            "mean_error_m,fraction_below_1.5m,wins_vs_baseline")
        assert len(lines) == 5  # two variants, two systems each
        systems = [ln.split(",")[2] for ln in lines[1:]]
        assert systems == ["refined", "baseline"] * 2
        stdout = capsys.readouterr().out
        assert "sigma=0 refined:" in stdout and "sigma=2 baseline:" in stdout

    def test_sigma_zero_medians_in_summary(self, tmp_path):
        scenario = tmp_path / "s.json"
        write_scenario(scenario, channel={"sigma_dbm": 0.0})
        out = tmp_path / "out"
        main(["sweep", str(scenario), "--vary", "sigma=0", "--out", str(out)])
        rows = [ln.split(",") for ln
                in (out / "summary.csv").read_text().splitlines()[1:]]
        refined = next(r for r in rows if r[2] == "refined")
        baseline = next(r for r in rows if r[2] == "baseline")
        assert float(refined[5]) < 1e-9
        assert float(baseline[5]) > float(refined[5])

    def test_n_prime_sweep_touches_estimator(self, tmp_path):
        scenario = tmp_path / "s.json"
        write_scenario(scenario, channel={"sigma_dbm": 0.0}, rounds=1)
        out = tmp_path / "out"
        code = main(["sweep", str(scenario), "--vary", "n_prime=2,3",
                     "--out", str(out)])
        assert code == EXIT_OK
        good = (out / "records_n_prime_2.csv").read_text().splitlines()[1]
        bad = (out / "records_n_prime_3.csv").read_text().splitlines()[1]
        assert float(good.split(",")[6]) < 1e-9
        assert float(bad.split(",")[6]) > 0.01

    def test_unknown_vary_key(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        assert main(["sweep", str(scenario), "--vary", "tau=0.1"]) == EXIT_ERROR
        assert "sigma" in capsys.readouterr().err

    def test_empty_vary_values(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        assert main(["sweep", str(scenario), "--vary", "sigma="]) == EXIT_ERROR
        assert "at least one value" in capsys.readouterr().err

    def test_unparsable_vary_values(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        write_scenario(scenario)
        assert main(["sweep", str(scenario), "--vary", "sigma=a,b"]) == EXIT_ERROR
        assert "--vary" in capsys.readouterr().err
