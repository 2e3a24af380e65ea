import csv
import json
import subprocess
import sys

import pytest
import yaml

from vpbspec.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_QUALITY, build_parser, main
from vpbspec.config import RunConfig, config_from_dict


def _write(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_parser_commands():
    p = build_parser()
    args = p.parse_args(["decay", "--threads", "2", "--seed", "5", "--check"])
    assert args.command == "decay" and args.threads == 2 and args.seed == 5 and args.check
    with pytest.raises(SystemExit):
        p.parse_args(["unknown"])


def test_coeffs_outputs(tmp_path):
    out = tmp_path / "a"
    assert main(["coeffs", "--out", str(out)]) == EXIT_OK
    h = RunConfig().hash
    with open(out / "coeffs.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "config_hash"
    assert all(r[0] == h for r in rows[1:])
    raw = (out / "coeffs.csv").read_bytes()
    assert b"\r\n" in raw
    # every float is written with 17 significant digits and round-trips
    for r in rows[1:]:
        for x in r[1:]:
            try:
                v = float(x)
            except ValueError:
                continue
            assert x == "%.17g" % v
    summary = json.loads((out / "summary.json").read_text())
    assert summary["provenance"]["config_hash"] == h
    assert summary["all_checks_passed"]
    text = (out / "summary.json").read_text()
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    assert config_from_dict(yaml.safe_load((out / "config.yaml").read_text())).hash == h


def test_deterministic_outputs(tmp_path):
    cfg = _write(tmp_path / "c.yaml", {"model": {"K": 6}, "scan": {"n": 8}, "seed": 3})
    x, y = tmp_path / "x", tmp_path / "y"
    assert main(["spectrum-scan", "--config", cfg, "--out", str(x)]) == EXIT_OK
    first = {p.name: p.read_bytes() for p in x.iterdir()}
    assert main(["spectrum-scan", "--config", cfg, "--out", str(x)]) == EXIT_OK
    assert {p.name: p.read_bytes() for p in x.iterdir()} == first
    # another output directory changes only the recorded out path, not the tables
    assert main(["spectrum-scan", "--config", cfg, "--out", str(y), "--threads", "2"]) == EXIT_OK
    for name, data in first.items():
        if name.endswith(".csv"):
            assert (y / name).read_bytes() == data


@pytest.mark.parametrize("data", [{"bogus": 1}, {"model": {"K": 1}}, {"model": {"tag": "x"}}])
def test_config_errors_exit_2(tmp_path, data, capsys):
    cfg = _write(tmp_path / "c.yaml", data)
    assert main(["coeffs", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config_exit_2(tmp_path):
    assert main(["coeffs", "--config", str(tmp_path / "none.yaml")]) == EXIT_CONFIG


def test_quality_gate_exit_3(tmp_path):
    cfg = _write(tmp_path / "c.yaml", {"radial": {"n": 6}})
    assert main(["nsp", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_QUALITY


def test_acceptance_failure_exit_4(tmp_path):
    # a short time window cannot resolve the algebraic rates
    cfg = _write(tmp_path / "c.yaml", {"time_grid": {"t_max": 30.0, "n": 20, "fit_window": [3.0, 30.0]}})
    out = str(tmp_path / "o")
    assert main(["nsp", "--config", cfg, "--out", out]) == EXIT_OK
    assert main(["nsp", "--config", cfg, "--out", out, "--check"]) == EXIT_CHECK
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert not summary["all_checks_passed"]


def test_check_command(tmp_path):
    out = tmp_path / "o"
    assert main(["check", "--out", str(out)]) == EXIT_OK
    with open(out / "invariants.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["passed"] == "true" for r in rows)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "vpbspec", "coeffs", "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "o" / "summary.json").exists()
