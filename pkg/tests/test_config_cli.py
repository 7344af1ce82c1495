"""Configuration loading and the four CLI subcommands, run in-process."""

from pathlib import Path

import pytest

from framesym import ConfigError, load_config
from framesym.cli import main

DOCS = Path(__file__).resolve().parents[1] / "docs" / "configs"


def write_config(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return path


MINIMAL = """
[geometry]
dim = 2
coords = ["x", "y"]
frame = [["1", "0"], ["0", "1+x^2"]]

[domain]
box = [[-3.0, 3.0], [-3.0, 3.0]]
"""


class TestLoadConfig:
    def test_reference_config(self):
        cfg = load_config(DOCS / "curved.cfg")
        assert cfg.dim == 2
        assert cfg.coords == ("x", "y")
        assert cfg.frame[1][1] == "1+x^2"
        assert cfg.resolution == (61, 61)
        assert cfg.samples == ((0.0, 0.0), (0.5, 0.0), (2.0, 0.0))
        assert cfg.rank_tol == 1e-9
        assert cfg.max_order == 5  # defaults to dim + 3
        spec = cfg.frame_spec()
        assert spec.n == 2

    def test_defaults_fill_in(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        assert cfg.ode_step == 1e-3
        assert cfg.probe_radius == 0.1
        assert cfg.probe_count == 6
        assert cfg.feature_tol == 1e-6
        assert cfg.killing_tol == 1e-6
        assert cfg.transport_tol == 1e-7
        assert cfg.resolution == (21, 21)
        assert len(cfg.samples) == 9  # 3^n interior lattice
        assert cfg.directory == "out"
        assert cfg.figures is True

    def test_wrong_frame_shape(self, tmp_path):
        bad = MINIMAL.replace('[["1", "0"], ["0", "1+x^2"]]',
                              '[["1", "0", "0"], ["0", "1", "0"]]')
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, bad))
        assert "expected 2 rows of 2 entries" in str(err.value)

    def test_negative_tolerance(self, tmp_path):
        bad = MINIMAL + "\n[numerics]\nrank_tol = -1\n"
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, bad))
        assert "rank_tol" in str(err.value)

    def test_bad_expression_reported(self, tmp_path):
        bad = MINIMAL.replace('"1+x^2"', '"1+*x"')
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, bad))
        assert "expression" in str(err.value)

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, MINIMAL + "\n[nonsense]\nkey = 1\n"))

    def test_max_order_bounds(self, tmp_path):
        bad = MINIMAL + "\n[numerics]\nmax_order = 9\n"
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, bad))
        assert "max_order" in str(err.value)

    def test_bad_box(self, tmp_path):
        bad = MINIMAL.replace("[[-3.0, 3.0], [-3.0, 3.0]]", "[[3.0, -3.0], [-3.0, 3.0]]")
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_line_numbers_in_errors(self, tmp_path):
        bad = MINIMAL + "\n[numerics]\nrank_tol = banana\n"
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, bad))
        assert err.value.line is not None


def run_cli(*argv):
    return main(list(argv))


class TestCli:
    def test_analyze_flat_homogeneous(self, tmp_path, capsys):
        code = run_cli("analyze", "--config", str(DOCS / "flat.cfg"),
                       "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 0
        assert "locally homogeneous on sampled region" in out
        assert (tmp_path / "analyze_report.txt").exists()
        assert (tmp_path / "analyze_dims.png").exists()

    def test_analyze_curved_not_homogeneous(self, tmp_path, capsys):
        code = run_cli("analyze", "--config", str(DOCS / "curved.cfg"),
                       "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 0
        assert "NOT locally homogeneous" in out

    def test_killing_rejects_non_generator(self, tmp_path, capsys):
        code = run_cli("killing", "--config", str(DOCS / "curved.cfg"),
                       "--at", "0,0", "--gen", "1,0", "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 1
        assert "generator not in Kill^3(x0): residual 2.0e+00" in out

    def test_killing_accepts_generator(self, tmp_path, capsys):
        code = run_cli("killing", "--config", str(DOCS / "curved.cfg"),
                       "--at", "0,0", "--gen", "0,1", "--out", str(tmp_path),
                       "--lattice-radius", "0.1", "--lattice-points", "3")
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS" in out
        csv_lines = (tmp_path / "killing_field.csv").read_text().splitlines()
        assert csv_lines[0] == "x1,x2,u1,u2,v1,v2"
        assert len(csv_lines) == 1 + 9
        assert (tmp_path / "killing_field.png").exists()

    def test_orbits_outputs(self, tmp_path, capsys):
        cfg_text = (DOCS / "curved.cfg").read_text().replace(
            "resolution = [61, 61]", "resolution = [15, 15]")
        cfg = tmp_path / "small.cfg"
        cfg.write_text(cfg_text)
        code = run_cli("orbits", "--config", str(cfg), "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 0
        assert "strata" in out
        assert (tmp_path / "orbit_atlas.csv").exists()
        assert (tmp_path / "orbit_atlas_summary.txt").exists()
        assert (tmp_path / "orbit_atlas.png").exists()

    def test_orbits_determinism(self, tmp_path, capsys):
        cfg_text = (DOCS / "curved.cfg").read_text().replace(
            "resolution = [61, 61]", "resolution = [15, 15]")
        cfg = tmp_path / "small.cfg"
        cfg.write_text(cfg_text)
        run_cli("orbits", "--config", str(cfg), "--out", str(tmp_path / "a"))
        run_cli("orbits", "--config", str(cfg), "--out", str(tmp_path / "b"))
        capsys.readouterr()
        assert ((tmp_path / "a" / "orbit_atlas.csv").read_bytes()
                == (tmp_path / "b" / "orbit_atlas.csv").read_bytes())

    def test_verify_passes(self, tmp_path, capsys):
        code = run_cli("verify", "--config", str(DOCS / "curved.cfg"),
                       "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 0
        assert "FAIL" not in out
        assert (tmp_path / "verify_report.txt").exists()

    def test_figures_flag_off(self, tmp_path, capsys):
        cfg_text = (DOCS / "flat.cfg").read_text().replace(
            "figures = true", "figures = false")
        cfg = tmp_path / "nofig.cfg"
        cfg.write_text(cfg_text)
        code = run_cli("analyze", "--config", str(cfg), "--out", str(tmp_path))
        capsys.readouterr()
        assert code == 0
        assert not (tmp_path / "analyze_dims.png").exists()

    def test_missing_config_exit_code(self, tmp_path, capsys):
        code = run_cli("analyze", "--config", str(tmp_path / "none.cfg"))
        err = capsys.readouterr().err
        assert code == 2
        assert "error:" in err

    def test_bad_vector_exit_code(self, tmp_path, capsys):
        code = run_cli("killing", "--config", str(DOCS / "curved.cfg"),
                       "--at", "0,zero", "--gen", "0,1", "--out", str(tmp_path))
        capsys.readouterr()
        assert code == 2

    def test_threads_env_respected(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FRAMESYM_THREADS", "2")
        cfg_text = (DOCS / "curved.cfg").read_text().replace(
            "resolution = [61, 61]", "resolution = [9, 9]")
        cfg = tmp_path / "threads.cfg"
        cfg.write_text(cfg_text)
        assert run_cli("orbits", "--config", str(cfg), "--out", str(tmp_path)) == 0
        capsys.readouterr()
