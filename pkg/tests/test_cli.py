import json
from pathlib import Path

import pytest

from u2ntn.cli import main
from u2ntn.config import parse_config, with_run_options
from u2ntn.errors import OutputError
from u2ntn.results import (
    RESULT_COLUMNS,
    emit_results,
    format_csv,
    format_number,
    result_rows,
    write_csv,
)
from u2ntn.scenario import run_scenario

GOLDEN = Path(__file__).parent / "golden" / "uav_rural_t200_s1.csv"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    return json.loads(err.strip().splitlines()[-1])


class TestFormatting:
    @pytest.mark.parametrize("value, digits, text", [
        (3, 6, "3"), (0.5, 3, "0.500"), (-1e-12, 6, "0.000000"), (float("nan"), 6, "nan"),
    ])
    def test_format_number(self, value, digits, text):
        assert format_number(value, digits) == text

    def test_header_only_when_empty(self):
        assert format_csv(RESULT_COLUMNS, []) == ",".join(RESULT_COLUMNS) + "\n"

    def test_rejects_commas(self):
        with pytest.raises(Exception):
            format_csv(("a",), [("x,y",)])

    def test_row_per_scheme_and_bin(self):
        cfg = with_run_options(parse_config("hap_environments"), trials=60, seed=0, mode=None)
        rows = result_rows(cfg.scenario_id, run_scenario(cfg))
        assert len(rows) == 2 * 20
        assert all(len(r) == len(RESULT_COLUMNS) for r in rows)


class TestFiles:
    def test_meta_companion(self, tmp_path):
        cfg = with_run_options(parse_config("uav_rural"), trials=40, seed=5, mode=None)
        path = emit_results(run_scenario(cfg), tmp_path / "out.csv", cfg)
        meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
        assert meta["seed"] == 5 and meta["trials"] == 40 and meta["schema_version"] == "1"
        assert meta["columns"] == list(RESULT_COLUMNS)
        assert path.read_text().startswith("scenario_id,scheme,")

    def test_same_seed_byte_identical(self, tmp_path):
        cfg = with_run_options(parse_config("uav_rural"), trials=80, seed=2, mode=None)
        a = emit_results(run_scenario(cfg), tmp_path / "a.csv", cfg).read_bytes()
        b = emit_results(run_scenario(cfg), tmp_path / "b.csv", cfg).read_bytes()
        assert a == b

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OutputError):
            write_csv(blocker / "sub" / "out.csv", ("a",), [("1",)], {})


class TestCommandLine:
    def test_no_arguments(self, capsys):
        code, _, err = run_cli(capsys)
        assert code == 2
        assert error_line(err) == {"error": "usage", "message": "missing subcommand", "exit": 2}

    def test_unknown_subcommand(self, capsys):
        code, _, err = run_cli(capsys, "frobnicate")
        assert code == 2 and error_line(err)["exit"] == 2

    def test_bad_config(self, capsys, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[lora]\nsf = 9\n")
        code, _, err = run_cli(capsys, "simulate", str(bad))
        assert code == 2 and error_line(err)["error"] == "config"

    def test_unwritable_output_is_runtime_error(self, capsys, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        code, _, err = run_cli(capsys, "simulate", "uav_rural", "--trials", "5", "--out", str(blocker / "x.csv"))
        assert code == 1 and error_line(err)["exit"] == 1

    def test_presets_list(self, capsys):
        code, out, _ = run_cli(capsys, "presets", "list")
        assert code == 0 and "table4_pipeline" in out.split()

    def test_presets_show(self, capsys):
        code, out, _ = run_cli(capsys, "presets", "show", "uav_dense")
        assert code == 0 and "n_devices = 100000" in out

    def test_simulate_preset_seed(self, capsys, tmp_path):
        out = tmp_path / "t4.csv"
        code, _, _ = run_cli(capsys, "simulate", "table4_pipeline.preset", "--seed", "7", "--trials", "40",
                             "--out", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(RESULT_COLUMNS) and len(lines) == 1 + 4 * 20
        assert json.loads(Path(str(out) + ".meta.json").read_text())["seed"] == 7

    def test_simulate_stdout(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "uav_rural", "--trials", "10")
        assert code == 0 and out.startswith("scenario_id,")

    def test_set_override(self, capsys, tmp_path):
        out = tmp_path / "o.csv"
        run_cli(capsys, "simulate", "uav_rural", "--trials", "10", "--set", "lora.sf=[7]", "--set",
                "lrfhss.enabled=false", "--out", str(out))
        assert {line.split(",")[1] for line in out.read_text().splitlines()[1:]} == {"SF7"}

    def test_analytical(self, capsys, tmp_path):
        out = tmp_path / "a.csv"
        code, _, _ = run_cli(capsys, "analytical", "uav_dense", "--n-devices", "1000,100000", "--out", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].split(",")[-1] == "p_fhss" and len(lines) == 1 + 2 * 20
        p = {int(r.split(",")[2]): float(r.split(",")[-1]) for r in lines[1:3] + lines[21:23]}
        assert p[1000] >= p[100000]

    def test_select(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        code, _, _ = run_cli(capsys, "select", "uav_rural", "--trials", "300", "--out", str(out))
        assert code == 0
        assert out.read_text().splitlines()[1].split(",")[1:3] == ["1", "SF7"]

    def test_select_bad_range(self, capsys):
        code, _, _ = run_cli(capsys, "select", "uav_rural", "--range-km", "5", "1")
        assert code == 2

    def test_sweep_records_bad_point(self, capsys, tmp_path):
        out = tmp_path / "w.csv"
        code, _, err = run_cli(capsys, "sweep", "hap_depth_vwc", "--param", "vwc", "--values", "0.1,1.5",
                               "--trials", "20", "--out", str(out))
        assert code == 0 and "sweep_point_failed" in err
        meta = json.loads(Path(str(out) + ".meta.json").read_text())
        assert list(meta["sweep_errors"]) == ["1.5"]

    def test_golden_csv(self, capsys, tmp_path):
        out = tmp_path / "g.csv"
        code, _, _ = run_cli(capsys, "simulate", "uav_rural", "--trials", "200", "--seed", "1", "--out", str(out))
        assert code == 0
        assert out.read_bytes() == GOLDEN.read_bytes()
