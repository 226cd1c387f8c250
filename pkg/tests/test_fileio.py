import math

import numpy as np
import pytest

from convective_ch.fileio import (
    ConfigError,
    RunConfig,
    SnapshotError,
    format_config,
    parse_config,
    read_snapshot,
    read_snapshot_header,
    write_snapshot,
)
from convective_ch.spectral import SpectralField, make_grid

MINIMAL = "M = 8\ndt = 0.01\nT = 0.1\ninitial = smooth\n"


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config(MINIMAL)
        assert (cfg.M, cfg.dt, cfg.T, cfg.initial) == (8, 0.01, 0.1, "smooth")
        assert cfg.L1 == cfg.L2 == math.pi
        assert cfg.params.drift == (1.0, 1.0)
        assert cfg.time_grid.steps == 10
        assert cfg.snapshot_cadence == 1
        assert cfg.reference_modes == 64
        assert cfg.dts == [0.01, 0.005, 0.0025, 0.00125]

    def test_comments_and_whitespace(self):
        cfg = parse_config("# header\n  M=4   # modes\n\ndt=0.1\nT = 0.3\ninitial = zero\nNs = 2,4,8\n")
        assert cfg.M == 4 and cfg.Ns == (2, 4, 8)

    def test_missing_keys(self):
        with pytest.raises(ConfigError) as info:
            parse_config("M = 4\n")
        assert "missing required keys: dt, T, initial" in str(info.value)

    def test_unknown_and_duplicate_keys_report_lines(self):
        with pytest.raises(ConfigError) as info:
            parse_config(MINIMAL + "bogus = 1\nM = 9\n")
        problems = info.value.problems
        assert any(p.startswith("line 5:") and "bogus" in p for p in problems)
        assert any(p.startswith("line 6:") and "duplicate" in p and "line 1" in p for p in problems)

    def test_bad_value(self):
        with pytest.raises(ConfigError) as info:
            parse_config(MINIMAL.replace("M = 8", "M = eight"))
        assert info.value.problems[0].startswith("line 1:")

    def test_gamma2_zero_with_diagnostics(self):
        with pytest.raises(ConfigError) as info:
            parse_config(MINIMAL + "gamma2 = 0\n")
        assert "c0" in str(info.value) and info.value.problems[0].startswith("line 5:")
        assert parse_config(MINIMAL + "gamma2 = 0\ndiagnostics = false\n").gamma2 == 0.0

    def test_dt_limit(self):
        with pytest.raises(ConfigError) as info:
            parse_config("M = 4\ndt = 5\nT = 5\ninitial = zero\n")
        assert "dt >= 4*gamma/c0^2" in str(info.value)

    def test_horizon_not_multiple_of_dt(self):
        with pytest.raises(ConfigError):
            parse_config("M = 4\ndt = 0.03\nT = 0.1\ninitial = zero\n")

    def test_unknown_initial(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL.replace("smooth", "bumpy"))

    def test_round_trip(self):
        cfg = parse_config(MINIMAL + "gamma1 = 0.3\ndrift_y = -0.25\nNs = 2,4,8\ndiagnostics = yes\n")
        text = format_config(cfg)
        assert parse_config(text) == cfg
        assert format_config(parse_config(text)) == text

    def test_canonical_form_lists_every_key(self):
        text = format_config(parse_config(MINIMAL))
        keys = [line.split(" = ")[0] for line in text.splitlines()]
        assert keys[:4] == ["M", "dt", "T", "initial"]
        assert len(keys) == len(RunConfig.__dataclass_fields__)


class TestSnapshots:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        g = make_grid(7, 1.0, 2.5)
        u = SpectralField(rng.standard_normal(g.shape) * 1e-3, g)
        path = tmp_path / "s.txt"
        write_snapshot(u, path, t=0.1 + 0.2)
        back = read_snapshot(path)
        np.testing.assert_array_equal(back.coefficients, u.coefficients)
        assert back.grid == g
        assert read_snapshot_header(path)["t"] == 0.1 + 0.2

    def test_truncated_file(self, tmp_path):
        g = make_grid(4)
        path = tmp_path / "s.txt"
        write_snapshot(SpectralField.mode(g, 2, 3), path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(SnapshotError, match="shape mismatch"):
            read_snapshot(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("NOPE\n2 1 1 0\n0 0\n0 0\n")
        with pytest.raises(SnapshotError, match="magic"):
            read_snapshot(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("CCH1\n2 1 x 0\n0 0\n0 0\n")
        with pytest.raises(SnapshotError):
            read_snapshot(path)

    def test_coarse_snapshot_onto_finer_grid(self, tmp_path, rng):
        coarse = make_grid(8)
        u = SpectralField(rng.standard_normal(coarse.shape), coarse)
        path = tmp_path / "s.txt"
        write_snapshot(u, path)
        fine = read_snapshot(path, make_grid(16))
        assert fine.grid.modes == 16
        np.testing.assert_array_equal(fine.coefficients[:8, :8], u.coefficients)
        assert not np.any(fine.coefficients[8:, :]) and not np.any(fine.coefficients[:, 8:])
        back = read_snapshot(path, make_grid(4))
        np.testing.assert_array_equal(back.coefficients, u.coefficients[:4, :4])
