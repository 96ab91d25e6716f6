"""End-to-end checks of the command-line interface.

Most tests drive ``cli.main`` in-process and read stdout/stderr through
capsys; a couple go through real subprocesses to cover the module entry
point and the --threads pinning, which must happen before numpy loads.
"""

import re
import subprocess
import sys

import numpy as np
import pytest

from gshape import cli
from gshape.evaluation import read_sweep_csv, gain_db
from gshape.generators import cartesian_bpsk, qam
from gshape.model import load_constellation


def run_cli(capsys, *argv):
    rc = cli.main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


@pytest.fixture
def qpsk_file(tmp_path, capsys):
    path = tmp_path / "qpsk.gs"
    rc, _, _ = run_cli(capsys, "generate", "qpsk", "-o", str(path))
    assert rc == 0
    return path


class TestQuadcheck:
    def test_twelve_dims(self, capsys):
        rc, out, _ = run_cli(capsys, "quadcheck", "-N", "12")
        assert rc == 0
        lines = out.splitlines()
        assert lines[0] == "N = 12"
        assert lines[1] == "RQ node budget L = 512"
        assert lines[2] == "GH tensor nodes n^N (n=10) = 1000000000000"
        assert lines[3] == "ratio R = 1.953125e+09"

    def test_eight_dims(self, capsys):
        rc, out, _ = run_cli(capsys, "quadcheck", "-N", "8")
        assert rc == 0
        lines = out.splitlines()
        assert lines[1] == "RQ node budget L = 256"
        assert lines[3] == "ratio R = 3.906250e+05"

    def test_custom_order(self, capsys):
        rc, out, _ = run_cli(capsys, "quadcheck", "-N", "2", "-n", "4")
        assert rc == 0
        assert "GH tensor nodes n^N (n=4) = 16" in out

    def test_rejects_nonpositive_dims(self, capsys):
        rc, _, err = run_cli(capsys, "quadcheck", "-N", "0")
        assert rc == 2
        assert "error:" in err


class TestGenerate:
    def test_qpsk_round_trip_is_bitwise(self, qpsk_file):
        points, labeling, name = load_constellation(qpsk_file)
        expect, expect_labels = cartesian_bpsk(2)
        assert (points.points == expect.points).all()
        assert (labeling.bits == expect_labels.bits).all()
        assert name == "bpsk2d"

    def test_summary_line(self, tmp_path, capsys):
        path = tmp_path / "c.gs"
        rc, out, _ = run_cli(capsys, "generate", "qam", "-M", "64",
                             "-o", str(path))
        assert rc == 0
        assert out.startswith(f"wrote {path}: M=64 N=2 m=6")

    def test_name_override(self, tmp_path, capsys):
        path = tmp_path / "c.gs"
        run_cli(capsys, "generate", "qpsk", "-o", str(path), "--name", "pilot")
        _, _, name = load_constellation(path)
        assert name == "pilot"

    def test_random_without_power_of_two_size_has_no_labels(
        self, tmp_path, capsys
    ):
        path = tmp_path / "r.gs"
        rc, out, _ = run_cli(capsys, "generate", "random", "-M", "12",
                             "-o", str(path))
        assert rc == 0
        assert "m=0" in out
        _, labeling, _ = load_constellation(path)
        assert labeling is None

    def test_product_of_two_files(self, tmp_path, qpsk_file, capsys):
        path = tmp_path / "p.gs"
        rc, out, _ = run_cli(capsys, "generate", "product",
                             "-a", str(qpsk_file), "-b", str(qpsk_file),
                             "-o", str(path))
        assert rc == 0
        assert "M=16 N=4 m=4" in out

    def test_product_requires_both_factors(self, qpsk_file, tmp_path, capsys):
        rc, _, err = run_cli(capsys, "generate", "product",
                             "-a", str(qpsk_file),
                             "-o", str(tmp_path / "p.gs"))
        assert rc == 2
        assert "factor" in err

    def test_product_rejects_unlabeled_factor(self, tmp_path, capsys):
        plain = tmp_path / "plain.gs"
        run_cli(capsys, "generate", "random", "-M", "12", "-o", str(plain))
        rc, _, err = run_cli(capsys, "generate", "product",
                             "-a", str(plain), "-b", str(plain),
                             "-o", str(tmp_path / "p.gs"))
        assert rc == 2
        assert "label" in err

    def test_sp12d(self, tmp_path, capsys):
        path = tmp_path / "sp.gs"
        rc, out, _ = run_cli(capsys, "generate", "sp12d", "-o", str(path))
        assert rc == 0
        assert "M=2048 N=12 m=11" in out


class TestEvaluate:
    def test_qpsk_saturates_at_high_snr(self, qpsk_file, capsys):
        rc, out, _ = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "30")
        assert rc == 0
        match = re.search(r"value=([0-9.]+)", out)
        assert match is not None
        assert abs(float(match.group(1)) - 2.0) <= 1e-3

    def test_single_line_format(self, qpsk_file, capsys):
        rc, out, _ = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "4")
        assert rc == 0
        assert re.fullmatch(
            r"snr_db=4 value=\d\.\d{6} value_per_2d=\d\.\d{6} "
            r"ngmi=\d\.\d{6} method=gh:10\n",
            out,
        )

    def test_grid_prints_one_line_per_point(self, qpsk_file, capsys):
        rc, out, _ = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "0:4:2")
        assert rc == 0
        lines = out.splitlines()
        assert len(lines) == 3
        assert lines[0].startswith("snr_db=0 ")
        assert lines[2].startswith("snr_db=4 ")

    def test_rq_estimator_method_string(self, qpsk_file, capsys):
        rc, out, _ = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "4", "--metric", "gmi",
                             "--estimator", "rq:64")
        assert rc == 0
        assert "method=rq:64,64" in out
        assert "std_error=" not in out

    def test_mc_estimator_reports_std_error(self, qpsk_file, capsys):
        rc, out, _ = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "4", "--estimator", "mc:2000")
        assert rc == 0
        assert "std_error=" in out
        assert "method=mc:2000" in out

    def test_gmi_needs_labels(self, tmp_path, capsys):
        plain = tmp_path / "plain.gs"
        run_cli(capsys, "generate", "random", "-M", "12", "-o", str(plain))
        rc, _, err = run_cli(capsys, "evaluate", "-c", str(plain),
                             "--snr", "4", "--metric", "GMI")
        assert rc == 2
        assert "label" in err

    def test_missing_file(self, capsys):
        rc, _, err = run_cli(capsys, "evaluate", "-c", "no-such.gs",
                             "--snr", "4")
        assert rc == 2
        assert "no such file" in err

    def test_bad_estimator(self, qpsk_file, capsys):
        rc, _, err = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "4", "--estimator", "simpson:5")
        assert rc == 2
        assert "error:" in err

    def test_bad_snr_grid(self, qpsk_file, capsys):
        rc, _, err = run_cli(capsys, "evaluate", "-c", str(qpsk_file),
                             "--snr", "4:0:1")
        assert rc == 2
        assert "error:" in err


class TestSweep:
    def test_requires_output(self, qpsk_file, capsys):
        rc, _, err = run_cli(capsys, "sweep", "-c", str(qpsk_file),
                             "--snr", "0:4:2")
        assert rc == 2
        assert "required" in err

    def test_csv_matches_in_process_sweep(self, qpsk_file, tmp_path, capsys):
        csv_path = tmp_path / "sweep.csv"
        rc, out, _ = run_cli(capsys, "sweep", "-c", str(qpsk_file),
                             "--snr", "0:8:2", "-o", str(csv_path))
        assert rc == 0
        assert f"wrote {csv_path}: 5 rows" in out
        sweep = read_sweep_csv(csv_path)
        assert [row.snr_db for row in sweep.rows] == [0.0, 2.0, 4.0, 6.0, 8.0]
        values = [row.value for row in sweep.rows]
        assert values == sorted(values)

    def test_capacity_column(self, qpsk_file, tmp_path, capsys):
        csv_path = tmp_path / "sweep.csv"
        run_cli(capsys, "sweep", "-c", str(qpsk_file), "--snr", "0:4:2",
                "-o", str(csv_path), "--capacity")
        header = csv_path.read_text().splitlines()[0]
        assert header.endswith(",capacity_per_2d")


class TestOptimize:
    CONFIG = """[constellation]
generator = random
size = 8
dims = 2
seed = 3

[channel]
snr_db = 6.0

[optimizer]
iterations = 40
eval_every = 20

[output]
name = demo
"""

    def test_run_writes_artifacts(self, tmp_path, capsys):
        ini = tmp_path / "run.ini"
        ini.write_text(self.CONFIG)
        outdir = tmp_path / "out"
        rc, out, _ = run_cli(capsys, "optimize", "-f", str(ini),
                             "-o", str(outdir))
        assert rc == 0
        assert (outdir / "demo.gs").exists()
        assert (outdir / "demo_trace.csv").exists()
        assert (outdir / "config.ini").exists()
        match = re.search(
            r"initial MI (\d\.\d{6}) -> best (\d\.\d{6}) at iteration (\d+)",
            out,
        )
        assert match is not None
        assert float(match.group(2)) >= float(match.group(1))

    def test_materialized_config_reloads(self, tmp_path, capsys):
        from gshape import __version__
        from gshape.config import load_run_config

        ini = tmp_path / "run.ini"
        ini.write_text(self.CONFIG)
        outdir = tmp_path / "out"
        run_cli(capsys, "optimize", "-f", str(ini), "-o", str(outdir))
        text = (outdir / "config.ini").read_text()
        assert f"version = {__version__}" in text
        cfg = load_run_config(outdir / "config.ini")
        assert cfg.generator == "random"
        assert cfg.optimizer_params["iterations"] == 40

    def test_missing_config(self, capsys):
        rc, _, err = run_cli(capsys, "optimize", "-f", "no-such.ini")
        assert rc == 2
        assert "no such file" in err

    def test_gmi_on_unlabeled_source(self, tmp_path, capsys):
        ini = tmp_path / "run.ini"
        ini.write_text(
            "[constellation]\ngenerator = random\nsize = 12\n\n"
            "[channel]\nsnr_db = 4.0\n\n[metric]\nmetric = GMI\n\n"
            "[optimizer]\niterations = 5\n"
        )
        rc, _, err = run_cli(capsys, "optimize", "-f", str(ini),
                             "-o", str(tmp_path / "out"))
        assert rc == 2
        assert "label" in err


class TestGainAndGaussianity:
    def test_gain_matches_library(self, qpsk_file, tmp_path, capsys):
        qam_path = tmp_path / "qam.gs"
        run_cli(capsys, "generate", "qam", "-M", "16", "-o", str(qam_path))
        sweep_a = tmp_path / "a.csv"
        sweep_b = tmp_path / "b.csv"
        run_cli(capsys, "sweep", "-c", str(qam_path), "--snr", "0:12:2",
                "-o", str(sweep_a))
        run_cli(capsys, "sweep", "-c", str(qpsk_file), "--snr", "0:12:2",
                "-o", str(sweep_b))
        rc, out, _ = run_cli(capsys, "gain", "-a", str(sweep_a),
                             "-b", str(sweep_b), "--target-air", "1.5")
        assert rc == 0
        expect = gain_db(read_sweep_csv(sweep_a), read_sweep_csv(sweep_b), 1.5)
        assert out.strip() == f"gain_db={expect:.6f}"

    def test_gain_outside_range_is_runtime_error(
        self, qpsk_file, tmp_path, capsys
    ):
        sweep = tmp_path / "s.csv"
        run_cli(capsys, "sweep", "-c", str(qpsk_file), "--snr", "0:8:2",
                "-o", str(sweep))
        rc, _, err = run_cli(capsys, "gain", "-a", str(sweep),
                             "-b", str(sweep), "--target-air", "3.9")
        assert rc == 1
        assert "error:" in err

    def test_gain_missing_sweep(self, capsys):
        rc, _, err = run_cli(capsys, "gain", "-a", "no.csv", "-b", "no.csv",
                             "--target-air", "1.0")
        assert rc == 2

    def test_gaussianity_output(self, tmp_path, capsys):
        sp_path = tmp_path / "sp.gs"
        run_cli(capsys, "generate", "sp12d", "-o", str(sp_path))
        hist = tmp_path / "hist.csv"
        rc, out, _ = run_cli(capsys, "gaussianity", "-c", str(sp_path),
                             "-o", str(hist))
        assert rc == 0
        assert re.match(
            r"ks_distance=\d\.\d{6} excess_kurtosis=-?\d\.\d{6}", out
        )
        assert hist.exists()

    def test_gaussianity_rejects_tiny_bin_count(self, qpsk_file, capsys):
        rc, _, err = run_cli(capsys, "gaussianity", "-c", str(qpsk_file),
                             "--bins", "3")
        assert rc == 2
        assert "error:" in err


class TestTopLevel:
    def test_unknown_command(self, capsys):
        rc, _, _ = run_cli(capsys, "frobnicate")
        assert rc == 2

    def test_no_arguments(self, capsys):
        rc, _, _ = run_cli(capsys)
        assert rc == 2

    def test_negative_threads(self, capsys):
        rc, _, err = run_cli(capsys, "--threads", "-1", "quadcheck", "-N", "2")
        assert rc == 2
        assert "--threads" in err


class TestSubprocess:
    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "q.gs"
        result = subprocess.run(
            [sys.executable, "-m", "gshape.cli", "generate", "qpsk",
             "-o", str(out)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert out.exists()

    def test_thread_pinning_does_not_change_results(self, tmp_path):
        con = tmp_path / "c.gs"
        subprocess.run(
            [sys.executable, "-m", "gshape.cli", "generate", "random",
             "-M", "16", "-N", "4", "-o", str(con)],
            check=True,
        )
        outputs = []
        for threads in ("1", "2"):
            result = subprocess.run(
                [sys.executable, "-m", "gshape.cli", "--threads", threads,
                 "evaluate", "-c", str(con), "--snr", "6",
                 "--estimator", "rq:128:7"],
                capture_output=True,
                text=True,
            )
            assert result.returncode == 0
            outputs.append(result.stdout)
        assert outputs[0] == outputs[1]
