import json
import subprocess
import sys
from pathlib import Path

import pytest

from dynhomog.cli import main

SMALL = """\
cell:
  layers:
    - {density: 1.0, compliance: 1.0, thickness: 0.5}
    - {density: 4.0, compliance: 0.0625, thickness: 0.5}
discretization: [3, 3]
fourier: {n_max: 6}
scan: {q_points: 4, n_branches: 2}
verify: {samples: 12, branch_q_points: 2}
seed: 11
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return p


def _run(*args):
    return main([str(a) for a in args])


def _tree(directory: Path):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_dispersion_writes_table_and_meta(small, tmp_path, capsys):
    out = tmp_path / "o"
    assert _run("dispersion", "--config", small, "--out", out, "--jobs", 1) == 0
    lines = (out / "dispersion.csv").read_text().splitlines()
    assert lines[0].startswith("branch,qa,q,omega")
    assert len(lines) == 1 + 4 * 2
    assert [ln.split(",")[0] for ln in lines[1:]] == ["1"] * 4 + ["2"] * 4
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["command"] == "dispersion" and meta["outputs"] == ["dispersion.csv"]
    assert meta["discretization"] == [3, 3] and meta["n_max"] == 6
    assert "dispersion.csv" in capsys.readouterr().out


def test_repeat_and_parallel_runs_are_byte_identical(small, tmp_path):
    outs = []
    for tag, jobs in (("a", 1), ("b", 1), ("c", 2)):
        out = tmp_path / tag
        assert _run("homogenize", "--config", small, "--out", out, "--jobs", jobs) == 0
        outs.append(_tree(out))
    assert outs[0] == outs[1] == outs[2]


def test_json_output(small, tmp_path):
    cfg = small.read_text() + "output: {format: json, precision: 8}\n"
    small.write_text(cfg)
    out = tmp_path / "j"
    assert _run("dispersion", "--config", small, "--out", out, "--jobs", 1) == 0
    rows = json.loads((out / "dispersion.json").read_text())
    assert isinstance(rows, list) and len(rows) == 8
    assert set(rows[0]) >= {"branch", "omega", "omega_exact", "rel_error"}


def test_fields_command(small, tmp_path):
    out = tmp_path / "f"
    assert _run("fields", "--config", small, "--out", out, "--q", 0.5, "--branch", 1) == 0
    (name,) = [p.name for p in out.glob("fields_*.csv")]
    assert name == "fields_q0.5_b1.csv"
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["outputs"] == [name]


def test_verify_passes_and_reports(small, tmp_path):
    out = tmp_path / "v"
    assert _run("verify", "--config", small, "--out", out, "--jobs", 1) == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["seed"] == 11 and report["passed"]
    names = {e["name"] for e in report["invariants"]}
    assert {"hermitian-assembly", "realness", "conjugacy", "product-identity"} <= names


def test_injected_fault_fails_named_invariant(small, tmp_path, capsys):
    out = tmp_path / "v"
    assert _run("verify", "--config", small, "--out", out, "--jobs", 1, "--inject-fault", "hermitian-assembly") == 5
    assert "hermitian-assembly" in capsys.readouterr().err
    report = json.loads((out / "verify.json").read_text())
    assert report["failed"] == ["hermitian-assembly"]


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SMALL.replace("[3, 3]", "[3]"))
    assert _run("dispersion", "--config", bad, "--out", tmp_path / "x") == 2
    err = capsys.readouterr().err
    assert "line 5" in err and "discretization" in err
    assert _run("dispersion", "--config", tmp_path / "missing.yaml") == 2


def test_missing_branch_exits_4(tmp_path, capsys):
    cfg = tmp_path / "h.yaml"
    cfg.write_text(
        "cell: {layers: [{density: 2.0, compliance: 0.5, thickness: 1.0}]}\n"
        "discretization: [2]\nscan: {n_branches: 1}\n"
    )
    assert _run("fields", "--config", cfg, "--out", tmp_path / "h", "--branch", 2) == 4
    assert "branch 2 not found" in capsys.readouterr().err


def test_console_script_entry_point(small, tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "dynhomog.cli", "--version"], capture_output=True, text=True
    )
    assert res.returncode == 0 and "0.1.0" in res.stdout
