import json
import subprocess
import sys
from pathlib import Path

import pytest

from felab import cli
from felab.kernels import load_table

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TINY = """
schema_version = 1
[filter]
name = "gaussian"
[initial]
kind = "multi_blob"
count = 2
radius = 0.3
spread = 0.5
[solver]
eps = 0.3
delta = 0.1
dt = 0.02
T = 0.1
cadence = 0.05
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_kernel_table_writes_checksummed_file(tmp_path, capsys):
    out = tmp_path / "g.tab"
    assert cli.main(["kernel-table", "--filter", "gaussian", "--eps", "0.2", "--out", str(out)]) == 0
    checksum, path = capsys.readouterr().out.split()
    assert path == str(out)
    assert load_table(out).checksum() == checksum


def test_kernel_table_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["kernel-table"])
    assert info.value.code == 2
    assert cli.main(["kernel-table", "--filter", "tophat"]) == 2
    assert "gaussian" in capsys.readouterr().err
    assert cli.main(["kernel-table", "--filter", "gaussian", "--eps", "-1"]) == 2


@pytest.mark.parametrize("text", [
    "schema_version = 1\n[solver]\neps = 0.1\nfoo = 1\n",  # unknown key
    "schema_version = 2\n",  # wrong schema
    "[solver]\neps = 0.1\n",  # missing schema
    "schema_version = 1\n[solver]\neps = 0.1\n",  # no data
])
def test_bad_configs_exit_2(tmp_path, text):
    assert cli.main(["simulate", _write(tmp_path, text), "--out", str(tmp_path)]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert cli.main(["simulate", str(tmp_path / "nope.toml")]) == 2


def test_two_vortex_strict_passes(tmp_path):
    assert cli.main(["simulate", str(CONFIGS / "two_vortex.toml"), "--out", str(tmp_path), "--strict"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert all(c["pass"] for c in summary["checks"].values())
    head = (tmp_path / "series.csv").read_text().splitlines()[0]
    assert summary["config_hash"] in head
    assert (tmp_path / "trajectory.csv").exists()


def test_strict_failure_exits_3(tmp_path):
    text = TINY + "[checks]\nhamiltonian_drift = 1e-300\n"
    assert cli.main(["simulate", _write(tmp_path, text), "--out", str(tmp_path), "--strict"]) == 3
    assert cli.main(["simulate", _write(tmp_path, text), "--out", str(tmp_path)]) == 0


def test_seed_determines_output(tmp_path):
    cfg = _write(tmp_path, TINY)
    runs = []
    for k, seed in enumerate((3, 3, 4)):
        out = tmp_path / f"r{k}"
        assert cli.main(["simulate", cfg, "--out", str(out), "--seed", str(seed)]) == 0
        runs.append((out / "series.csv").read_text())
    assert runs[0] == runs[1] != runs[2]


def test_verify_json(tmp_path):
    out = tmp_path / "v.json"
    assert cli.main(["verify", "--filter", "gaussian", "--out", str(out), "--strict"]) == 0
    rep = json.loads(out.read_text())
    assert rep["gaussian"]["passed"]


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "felab.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for name in ("kernel-table", "simulate", "sweep", "limit-study", "verify"):
        assert name in r.stdout
