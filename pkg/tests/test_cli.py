"""Command-line surface: dispatch, exit codes, config precedence, outputs."""

import json
import subprocess
import sys

import numpy as np
import pytest

from bcs.cli import main


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture()
def dataset_dir(tmp_path, capsys):
    code = main(
        [
            "generate",
            "--n", "30", "--p", "12",
            "--signal", "1.5,-2",
            "--intercept",
            "--seed", "7",
            "--output-dir", str(tmp_path),
        ]
    )
    capsys.readouterr()
    assert code == 0
    return tmp_path


FIT_ARGS = ["--family", "student-t", "--gamma", "0.3", "--burn-in", "50",
            "--iterations", "200", "--thin", "2", "--seed", "11"]


class TestExitCodes:
    def test_usage_error_is_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--no-such-flag"])
        assert exc.value.code == 1

    def test_missing_required_flag_is_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["select"])
        assert exc.value.code == 1

    def test_missing_file_is_one(self, capsys):
        code, _, err = run_cli(["select", "--chain", "no-such-file.csv"], capsys)
        assert code == 1
        assert "error" in err

    def test_runtime_failure_is_two(self, tmp_path, capsys):
        # a spec whose every tuning point fails: gamma so large the scale
        # underflows to zero
        spec = {
            "n": 20, "p": 8,
            "cov": {"kind": "independent", "rho": 0.0},
            "truth": {"beta_star": [1.0] + [0.0] * 7, "sigma_star": 1.0},
            "prior_family": "student-t",
            "gamma_grid": [4000.0],
            "replicates": 1,
            "base_seed": 1,
            "sampler": {"burn_in": 10, "iterations": 20, "thin": 1, "seed": 0,
                        "block_size": None},
        }
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(spec))
        code, _, _ = run_cli(
            ["run-scenario", "--spec", str(p), "--out", str(tmp_path / "out")], capsys
        )
        assert code == 2


class TestCheckPrior:
    def test_stdout_json(self, capsys):
        code, out, _ = run_cli(
            ["check-prior", "--family", "student-t", "--a1", "1.5", "--gamma", "0.5",
             "--n", "120", "--p", "200", "--s", "4", "--u", "0.5"],
            capsys,
        )
        assert code == 0
        doc = json.loads(out)
        assert {"a_n", "tail_mass", "l_n", "passes_consistency", "passes_selection"} <= set(doc)
        assert doc["inputs"]["p"] == 200

    def test_repeat_runs_identical(self, capsys):
        args = ["check-prior", "--family", "laplace", "--lam", "20",
                "--n", "100", "--p", "501", "--s", "3", "--u", "0"]
        _, out1, _ = run_cli(args, capsys)
        _, out2, _ = run_cli(args, capsys)
        assert out1 == out2


class TestPipeline:
    def test_generate_outputs(self, dataset_dir):
        assert (dataset_dir / "data.csv").exists()
        meta = json.loads((dataset_dir / "data.json").read_text())
        assert meta["n"] == 30 and meta["p"] == 12
        assert meta["truth"]["beta_star"][1] == 1.5
        assert meta["cli_config"]["seed"] == 7

    def test_fit_select_intervals_bvm(self, dataset_dir, capsys):
        code = main(
            ["fit", "--data", str(dataset_dir / "data.csv"), "--response", "y",
             *FIT_ARGS, "--output-dir", str(dataset_dir)]
        )
        capsys.readouterr()
        assert code == 0
        chain = dataset_dir / "chain.csv"
        meta = json.loads((dataset_dir / "chain.meta.json").read_text())
        assert meta["kept"] == 100
        assert meta["gamma"] == 0.3
        assert meta["cli_config"]["iterations"] == 200

        code, out, _ = run_cli(["select", "--chain", str(chain)], capsys)
        assert code == 0
        sel = json.loads(out)
        assert set(sel["selected"]) <= set(range(12))
        assert len(sel["q"]) == 12

        code, out, _ = run_cli(["intervals", "--chain", str(chain), "--alpha", "0.1"], capsys)
        assert code == 0
        ivl = json.loads(out)
        assert len(ivl["lower"]) == 12
        assert all(a <= b for a, b in zip(ivl["lower"], ivl["upper"]))

        code, out, _ = run_cli(
            ["bvm", "--chain", str(chain), "--data", str(dataset_dir / "data.csv"),
             "--truth", str(dataset_dir / "data.json")],
            capsys,
        )
        assert code == 0
        bvm = json.loads(out)
        assert {c["index"] for c in bvm["on_support"]} == {1, 2}

    def test_fit_is_deterministic(self, dataset_dir, capsys):
        a = dataset_dir / "a"
        b = dataset_dir / "b"
        for out in (a, b):
            code = main(
                ["fit", "--data", str(dataset_dir / "data.csv"), *FIT_ARGS,
                 "--output-dir", str(out)]
            )
            capsys.readouterr()
            assert code == 0
        assert (a / "chain.csv").read_bytes() == (b / "chain.csv").read_bytes()

    def test_dump_latents_adds_columns(self, dataset_dir, capsys):
        code = main(
            ["fit", "--data", str(dataset_dir / "data.csv"), *FIT_ARGS,
             "--dump-latents", "--output-dir", str(dataset_dir / "lat")]
        )
        capsys.readouterr()
        assert code == 0
        header = (dataset_dir / "lat" / "chain.csv").read_text().splitlines()[0]
        assert "lambda2_0" in header


class TestTuneCli:
    def test_tune_outputs(self, dataset_dir, capsys):
        code, out, _ = run_cli(
            ["tune", "--data", str(dataset_dir / "data.csv"),
             "--grid", "0.0,0.4", "--burn-in", "50", "--iterations", "200",
             "--thin", "2", "--seed", "5", "--output-dir", str(dataset_dir / "tune")],
            capsys,
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["gammas"] == [0.0, 0.4]
        assert doc["gamma_hat"] in (0.0, 0.4)
        assert (dataset_dir / "tune" / "tuning.csv").exists()
        assert (dataset_dir / "tune" / "chain.csv").exists()

    def test_grid_colon_syntax(self, dataset_dir, capsys):
        code, out, _ = run_cli(
            ["tune", "--data", str(dataset_dir / "data.csv"),
             "--grid", "0.0:0.5:0.25", "--burn-in", "20", "--iterations", "60",
             "--thin", "2", "--seed", "5", "--output-dir", str(dataset_dir / "tune2")],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["gammas"] == [0.0, 0.25, 0.5]


class TestConfigPrecedence:
    def test_flags_beat_config_beat_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "conf.json"
        cfg.write_text(json.dumps({"n": 25, "p": 9, "seed": 3}))
        code = main(
            ["generate", "--config", str(cfg), "--seed", "4",
             "--signal", "1", "--output-dir", str(tmp_path)]
        )
        capsys.readouterr()
        assert code == 0
        meta = json.loads((tmp_path / "data.json").read_text())
        assert meta["n"] == 25          # from config file
        assert meta["seed"] == 4        # flag wins over config
        assert meta["cli_config"]["sigma_star"] == 1.0  # built-in default

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "conf.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        code, _, err = run_cli(["generate", "--config", str(cfg)], capsys)
        assert code == 1
        assert "bogus" in err


class TestBench:
    def test_tiny_bench_json(self, capsys):
        code, out, err = run_cli(
            ["bench", "--n", "20", "--p", "40", "--sweeps", "2"], capsys
        )
        assert code == 0
        doc = json.loads(out)
        assert set(doc["results"]) == {"d=1", f"d={round((20*40)**(1/3)+0.5)}", "d=40"}
        assert "block size" in err

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "bcs", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "bcs" in proc.stdout
