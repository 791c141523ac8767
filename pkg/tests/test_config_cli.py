import csv

import pytest

from multistop.cli import EXIT_CONFIG, EXIT_OK, main
from multistop.config import ConfigError, ScenarioConfig, parse_config


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg == ScenarioConfig()
        assert cfg.project.lifetime == 5.0 and cfg.benchmark.lifetime == 25.0

    def test_overrides_and_inherited_cost(self):
        cfg = parse_config("[market]\nsigma = 0.3\n[project]\nop_cost = 0.2\n[contour]\nlifetimes = 1, 2\n")
        assert cfg.market.sigma == 0.3
        assert cfg.benchmark.op_cost == 0.2
        assert cfg.contour.lifetimes == (1.0, 2.0)

    @pytest.mark.parametrize(
        "text,where",
        [
            ("[market]\nalpha = 0.05\nsigma = -1\n", "f.ini:3"),
            ("[market]\n\nbogus = 1\n", "f.ini:3"),
            ("[nowhere]\nx = 1\n", "f.ini:1"),
            ("[solver]\nk_max = many\n", "f.ini:2"),
            ("[project]\nflexible = maybe\n", "f.ini:2"),
        ],
    )
    def test_errors_name_line(self, text, where):
        with pytest.raises(ConfigError, match=where):
            parse_config(text, "f.ini")


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCli:
    def test_solve_outputs(self, tmp_path, capsys):
        assert main(["solve", "--out", str(tmp_path), "--jobs", "1"]) == EXIT_OK
        b = _read(tmp_path / "boundaries.csv")
        assert b[0] == ["k", "boundary", "epsilon", "psi_star"]
        assert abs(float(b[1][1]) - 0.85) < 0.01
        v = _read(tmp_path / "value.csv")
        assert v[0][:3] == ["x", "v_1", "v_2"] and v[0][-1] == "v_final"
        assert len(v) == 501
        out = capsys.readouterr().out
        assert "x1_star = " in out and "converged = 1" in out

    def test_solve_is_deterministic(self, tmp_path):
        main(["solve", "--out", str(tmp_path / "a")])
        main(["solve", "--out", str(tmp_path / "b")])
        for name in ("boundaries.csv", "value.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[market]\nsigma = -1\n")
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "bad.ini:2" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "none.ini")]) == EXIT_CONFIG

    def test_sweep(self, tmp_path):
        assert main(["sweep", "--axis", "sigma", "--values", "0.15,0.25", "--out", str(tmp_path), "--jobs", "1"]) == EXIT_OK
        rows = _read(tmp_path / "sweep_sigma.csv")
        assert rows[0][:2] == ["sigma", "x1_star"] and rows[0][-1] == "error"
        assert float(rows[2][4]) > float(rows[1][4])

    def test_contour(self, tmp_path):
        args = ["contour", "--lifetimes", "2.5", "--lead-times", "0.3", "--tol", "0.05", "--out", str(tmp_path), "--jobs", "1"]
        assert main(args) == EXIT_OK
        rows = _read(tmp_path / "contour.csv")
        assert rows[0] == ["T_small", "nu_small", "I_crit", "I_crit_upper", "npv_I_crit", "error"]
        assert abs(float(rows[1][2]) - 0.5) < 0.06

    def test_oracle(self, capsys):
        assert main(["oracle", "--k", "2", "--paths", "100000", "--jobs", "1"]) == EXIT_OK
        assert "z_score = " in capsys.readouterr().out

    def test_oracle_bad_args(self):
        assert main(["oracle", "--k", "0"]) == EXIT_CONFIG
