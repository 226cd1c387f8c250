import csv

import numpy as np
import pytest

from convective_ch.cli import main
from convective_ch.fileio import format_config, parse_config, read_snapshot, write_snapshot
from convective_ch.spectral import SpectralField, make_grid, norms


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("CCH_OUTPUT_DIR", str(out))
    return out


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_zero_initial_data(tmp_path, outdir):
    cfg = write_cfg(tmp_path, "M = 6\ndt = 0.01\nT = 0.05\ninitial = zero\n")
    assert main(["run", cfg]) == 0
    rows = read_csv(outdir / "diagnostics.csv")
    assert [int(r["step"]) for r in rows] == list(range(6))
    for r in rows:
        assert float(r["l2"]) == float(r["h1"]) == float(r["h2"]) == float(r["linf"]) == 0.0
        assert r["l2_bound_ok"] == "true"
    snaps = sorted(p.name for p in outdir.glob("snapshot_*.txt"))
    assert snaps == [f"snapshot_{k:06d}.txt" for k in range(6)]


def test_run_is_deterministic_and_full_precision(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, "M = 8\ndt = 0.005\nT = 0.05\ninitial = smooth\nsnapshot_every = 5\n")
    outputs = []
    for name in ("a", "b"):
        monkeypatch.setenv("CCH_OUTPUT_DIR", str(tmp_path / name))
        assert main(["run", cfg]) == 0
        outputs.append((tmp_path / name / "diagnostics.csv").read_bytes())
    assert outputs[0] == outputs[1]
    rows = read_csv(tmp_path / "a" / "diagnostics.csv")
    final = read_snapshot(tmp_path / "a" / "snapshot_000010.txt")
    assert float(rows[-1]["l2"]) == norms(final).l2
    assert all(r["l2_bound_ok"] == "true" for r in rows)
    assert float(rows[-1]["mass"]) != float(rows[0]["mass"])


def test_run_from_coarse_snapshot(tmp_path, outdir):
    g = make_grid(8)
    snap = tmp_path / "init.txt"
    write_snapshot(SpectralField.mode(g, 1, 2, 0.3), snap)
    cfg = write_cfg(tmp_path, f"M = 16\ndt = 0.01\nT = 0.02\ninitial = file:{snap}\n")
    assert main(["run", cfg]) == 0
    first = read_snapshot(outdir / "snapshot_000000.txt")
    assert first.grid.modes == 16
    assert first.coefficients[0, 1] == 0.3


def test_print_config_round_trip(tmp_path, capsys):
    text = "# demo\nM = 8\ndt = 0.01  # step\nT = 0.1\ninitial = smooth\ngamma1 = 0.25\n"
    cfg = write_cfg(tmp_path, text)
    assert main(["print-config", cfg]) == 0
    printed = capsys.readouterr().out
    assert printed == format_config(parse_config(text))
    again = write_cfg(tmp_path, printed, "again.cfg")
    assert main(["print-config", again]) == 0
    assert capsys.readouterr().out == printed


def test_verify_oracle(capsys):
    assert main(["verify-oracle"]) == 0
    assert "max relative deviation" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 1
    bad = write_cfg(tmp_path, "M = 4\n")
    assert main(["run", bad]) == 1
    assert "missing required keys" in capsys.readouterr().err


def test_non_convergence_exit_code(tmp_path, outdir, capsys):
    cfg = write_cfg(tmp_path, "M = 32\ndt = 0.05\nT = 0.1\ninitial = h2_borderline\n"
                              "rel_tol = 1e-16\nmax_iter = 1\n")
    assert main(["run", cfg]) == 2
    assert "step 1" in capsys.readouterr().err


def test_converge_time_default(tmp_path, outdir, capsys):
    cfg = write_cfg(tmp_path, "M = 4\ndt = 0.02\nT = 0.2\ninitial = manufactured\nms_mode_x = 1\n")
    assert main(["converge-time", cfg]) == 0
    assert "fitted order" in capsys.readouterr().out
    rows = read_csv(outdir / "convergence_time.csv")
    assert len(rows) == 4
    order = float(rows[0]["fitted_order"])
    assert 0.85 <= order <= 1.15
    assert np.all(np.diff([float(r["error"]) for r in rows]) < 0)


def test_converge_space_writes_report(tmp_path, outdir):
    cfg = write_cfg(tmp_path, "M = 4\ndt = 1e-7\nT = 1e-6\ninitial = h2_borderline\nNs = 4,8,16\n")
    assert main(["converge-space", cfg]) == 0
    rows = read_csv(outdir / "convergence_space.csv")
    assert [int(float(r["resolution"])) for r in rows] == [4, 8, 16]
