import hashlib
import json
import os

import pytest

from ima_lab.cli import SEED_ENV_VAR, build_parser, main, run, validate_run_config
from ima_lab.errors import ValidationError


def write_config(tmp_path, name, config):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


SWEEP_CONFIG = {
    "command": "sweep",
    "params": {"d": 2, "delta": 0.2, "m_list": [8, 16], "trials": 50},
    "master_seed": 99,
}


class TestConfigValidation:
    def test_unknown_top_level_key_rejected(self):
        bad = dict(SWEEP_CONFIG, typo_key=1)
        with pytest.raises(ValidationError):
            validate_run_config(bad)

    def test_unknown_param_key_rejected(self, tmp_path, capsys):
        cfg = {
            "command": "sweep",
            "params": {"d": 2, "delta": 0.2, "m_list": [8], "trials": 10, "bogus": 1},
        }
        path = write_config(tmp_path, "bad.json", cfg)
        code = main(["sweep", "--config", path, "--output-dir", str(tmp_path / "out")])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "validation"
        assert not (tmp_path / "out" / "sweep.csv").exists()

    def test_bad_seed_type(self):
        bad = dict(SWEEP_CONFIG, master_seed="seven")
        with pytest.raises(ValidationError):
            validate_run_config(bad)

    def test_unknown_command(self):
        with pytest.raises(ValidationError):
            validate_run_config({"command": "plot", "params": {}})

    def test_precondition_violation_is_exit_2(self, tmp_path, capsys):
        cfg = {"command": "sweep", "params": {"d": 2, "delta": -0.5, "m_list": [8], "trials": 10}}
        path = write_config(tmp_path, "neg.json", cfg)
        code = main(["sweep", "--config", path, "--output-dir", str(tmp_path / "o")])
        assert code == 2

    def test_command_mismatch(self, tmp_path):
        path = write_config(tmp_path, "sweep.json", SWEEP_CONFIG)
        assert main(["genericity", "--config", path]) == 2

    def test_numerical_failure_is_exit_3(self, tmp_path, capsys):
        cfg = {
            "command": "contrast",
            "params": {"matrix": [[1.0, 1.0], [1.0, 1.0]]},  # rank deficient
        }
        path = write_config(tmp_path, "rankdef.json", cfg)
        code = main(["contrast", "--config", path, "--output-dir", str(tmp_path / "o")])
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "numerical"
        assert err["type"] == "RankDeficientError"


class TestHelp:
    def test_every_subcommand_has_help(self, capsys):
        parser = build_parser()
        for cmd in ("contrast", "sweep", "genericity", "spurious", "reparam"):
            with pytest.raises(SystemExit):
                parser.parse_args([cmd, "--help"])
            out = capsys.readouterr().out
            for flag in ("--config", "--seed", "--threads", "--output-dir"):
                assert flag in out


class TestRuns:
    def test_sweep_d1_success_column_all_ones(self, tmp_path):
        cfg = {
            "command": "sweep",
            "params": {"d": 1, "delta": 0.1, "m_list": [4, 8], "trials": 30},
            "master_seed": 5,
            "output_dir": str(tmp_path / "out"),
        }
        assert run(cfg) == 0
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        header = lines[0].split(",")
        idx = header.index("empirical_success")
        for line in lines[1:]:
            assert line.split(",")[idx] == "1.0"

    def test_contrast_matrix_mode(self, tmp_path):
        cfg = {
            "command": "contrast",
            "params": {"matrix": [[1.0, 1.0], [0.0, 1.0]]},
            "output_dir": str(tmp_path / "out"),
        }
        assert run(cfg) == 0
        lines = (tmp_path / "out" / "contrast.csv").read_text().splitlines()
        assert lines[0].split(",")[0] == "mean"
        assert float(lines[1].split(",")[0]) == pytest.approx(0.34657359027997264)

    def test_contrast_map_mode(self, tmp_path):
        cfg = {
            "command": "contrast",
            "params": {
                "map": {"family": "conformal", "d": 2, "m": 6},
                "source": [{"kind": "gaussian", "params": {"mu": 0.0, "sigma": 1.0}}] * 2,
                "n_samples": 200,
            },
            "master_seed": 3,
            "output_dir": str(tmp_path / "out"),
        }
        assert run(cfg) == 0
        lines = (tmp_path / "out" / "contrast.csv").read_text().splitlines()
        assert float(lines[1].split(",")[0]) <= 1e-8

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        run(dict(SWEEP_CONFIG, output_dir=out_a))
        run(dict(SWEEP_CONFIG, output_dir=out_b))
        assert sha256(os.path.join(out_a, "sweep.csv")) == sha256(os.path.join(out_b, "sweep.csv"))

    def test_thread_count_leaves_csv_identical(self, tmp_path):
        out_a = str(tmp_path / "t1")
        out_b = str(tmp_path / "t4")
        run(dict(SWEEP_CONFIG, output_dir=out_a, threads=1))
        run(dict(SWEEP_CONFIG, output_dir=out_b, threads=4))
        assert sha256(os.path.join(out_a, "sweep.csv")) == sha256(os.path.join(out_b, "sweep.csv"))

    def test_manifest_roundtrips_to_valid_config(self, tmp_path):
        out = str(tmp_path / "out")
        run(dict(SWEEP_CONFIG, output_dir=out))
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        rebuilt = validate_run_config(manifest["config"])
        assert rebuilt["command"] == "sweep"
        assert rebuilt["master_seed"] == 99
        # and re-running the echoed config reproduces the CSV
        out2 = str(tmp_path / "out2")
        rebuilt = dict(rebuilt, output_dir=out2)
        run(rebuilt)
        assert sha256(os.path.join(out, "sweep.csv")) == sha256(os.path.join(out2, "sweep.csv"))

    def test_seed_env_var_overrides_config(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, "sweep.json", SWEEP_CONFIG)
        out_env = str(tmp_path / "env")
        monkeypatch.setenv(SEED_ENV_VAR, "12345")
        assert main(["sweep", "--config", path, "--output-dir", out_env]) == 0
        manifest = json.loads((tmp_path / "env" / "manifest.json").read_text())
        assert manifest["master_seed"] == 12345
        # explicit flag beats the env var
        out_flag = str(tmp_path / "flag")
        assert main(["sweep", "--config", path, "--output-dir", out_flag, "--seed", "777"]) == 0
        manifest = json.loads((tmp_path / "flag" / "manifest.json").read_text())
        assert manifest["master_seed"] == 777

    def test_spurious_cli(self, tmp_path):
        cfg = {
            "command": "spurious",
            "params": {"m": 5, "n_mc": 300, "darmois_resolution": 256},
            "master_seed": 8,
            "output_dir": str(tmp_path / "out"),
        }
        assert run(cfg) == 0
        text = (tmp_path / "out" / "spurious.csv").read_text()
        assert "spurious_darmois" in text and "truth_mpa" in text

    def test_reparam_cli(self, tmp_path):
        cfg = {
            "command": "reparam",
            "params": {
                "configs": [
                    {
                        "map": {"family": "linear", "d": 2, "m": 5},
                        "source": [{"kind": "gaussian", "params": {}}] * 2,
                        "perm": [1, 0],
                        "transforms": [{"kind": "affine", "a": 2.0, "b": 0.0}, {"kind": "tanh"}],
                    }
                ],
                "n_mc": 200,
            },
            "master_seed": 6,
            "output_dir": str(tmp_path / "out"),
        }
        assert run(cfg) == 0
        lines = (tmp_path / "out" / "reparam.csv").read_text().splitlines()
        assert lines[0].startswith("config_index,")
        assert lines[1].endswith("true")

    def test_genericity_cli(self, tmp_path):
        cfg = {
            "command": "genericity",
            "params": {"d": 2, "m_list": [16], "delta_grid": 0.5, "eps": 0.01,
                        "delta_contrast": 0.1, "trials": 5, "n_mc": 200},
            "master_seed": 4,
            "output_dir": str(tmp_path / "out"),
        }
        assert run(cfg) == 0
        assert (tmp_path / "out" / "genericity.csv").exists()
