import io
import os

import numpy as np
import pytest

from alefsi.cli import main
from alefsi.config import SolverConfig
from alefsi.driver import csv_columns, read_timeseries, run
from alefsi.partition import SCALING_COLUMNS


def run_to_text(config):
    buf = io.StringIO()
    status = run(config, stream=buf)
    return status, buf.getvalue()


def parse_text(text, tmp_path):
    path = tmp_path / "ts.csv"
    path.write_text(text)
    return read_timeseries(path)


class TestRun:
    def test_zero_inflow_all_functionals_zero(self, tmp_path):
        cfg = SolverConfig(order=1, dt=0.005, t_end=0.02, inflow_scale=0.0)
        status, text = run_to_text(cfg)
        assert status == 0
        header, cols, data = parse_text(text, tmp_path)
        assert cols == csv_columns(cfg)
        assert data.shape == (4, len(cols))
        functional = [i for i, c in enumerate(cols) if c not in ("t",)]
        assert np.all(data[:, functional] == 0.0)
        assert np.allclose(data[:, 0], [0.005, 0.01, 0.015, 0.02])

    def test_header_echoes_material_parameters(self, tmp_path):
        cfg = SolverConfig(order=1, dt=0.01, t_end=0.01, inflow_scale=0.0)
        _, text = run_to_text(cfg)
        header, _, _ = parse_text(text, tmp_path)
        assert float(header["rho_s"]) == 1.0e4
        assert float(header["nu_f"]) == 1.0e-3
        assert float(header["lambda"]) == 2.0e6
        assert float(header["mu"]) == 0.5e6
        assert float(header["theta"]) == pytest.approx(0.51)
        assert int(header["n_dofs"]) > 0

    def test_box3d_columns(self, tmp_path):
        cfg = SolverConfig(
            benchmark="box3d", order=1, dt=0.01, t_end=0.01, inflow_scale=0.0
        )
        status, text = run_to_text(cfg)
        assert status == 0
        _, cols, data = parse_text(text, tmp_path)
        for i in range(1, 5):
            for c in (f"ux_P{i}", f"uy_P{i}", f"uz_P{i}"):
                assert c in cols
        assert data.shape[0] == 1

    def test_run_is_deterministic(self):
        cfg = SolverConfig(order=1, dt=0.005, t_end=0.01)
        _, first = run_to_text(cfg)
        _, second = run_to_text(cfg)
        assert first == second
        # with inflow switched on the step actually does work
        rows = [l for l in first.splitlines() if not l.startswith("#")]
        last = [float(v) for v in rows[-1].split(",")]
        assert last[-2] > 0  # newton iterations


class TestCli:
    def test_missing_config_file_is_usage_error(self, capsys):
        assert main(["run", "/nonexistent/path.cfg"]) == 2

    def test_bad_config_value_is_usage_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dt = -3\n")
        assert main(["run", str(cfg)]) == 2

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 2

    def test_run_writes_to_env_output_dir(self, tmp_path, monkeypatch):
        out = tmp_path / "out"
        out.mkdir()
        monkeypatch.setenv("ALEFSI_OUTPUT_DIR", str(out))
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "order = 1\ndt = 0.01\nt_end = 0.01\ninflow_scale = 0\noutput = ts.csv\n"
        )
        assert main(["run", str(cfg)]) == 0
        header, cols, data = read_timeseries(out / "ts.csv")
        assert data.shape[0] == 1

    def test_output_dir_flag_overrides_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ALEFSI_OUTPUT_DIR", "/nonexistent")
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "order = 1\ndt = 0.01\nt_end = 0.01\ninflow_scale = 0\noutput = ts.csv\n"
        )
        assert main(["--output-dir", str(tmp_path), "run", str(cfg)]) == 0
        assert (tmp_path / "ts.csv").exists()

    def test_scaling_writes_csv(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("order = 2\n")
        code = main(["--output-dir", str(tmp_path), "scaling", str(cfg), "--threads", "1"])
        assert code == 0
        lines = (tmp_path / "scaling.csv").read_text().strip().splitlines()
        assert lines[0] == ",".join(SCALING_COLUMNS)
        assert len(lines) == 2
        row = dict(zip(SCALING_COLUMNS, lines[1].split(",")))
        assert row["threads"] == "1"
        assert int(row["n_dofs"]) > 0
        assert float(row["t_assemble_s"]) > 0
        assert int(row["gmres_iters"]) > 0

    def test_scaling_bad_threads_is_usage_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("order = 1\n")
        assert main(["scaling", str(cfg), "--threads", "0,x"]) == 2
