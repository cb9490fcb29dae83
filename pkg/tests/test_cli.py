import json
import os

import pandas as pd
from click.testing import CliRunner

from panelirf.cli import main


def run_cli(*args):
    return CliRunner().invoke(main, list(args))


class TestCli:
    def test_help_lists_subcommands(self):
        result = run_cli("--help")
        assert result.exit_code == 0
        for cmd in ("identify", "estimate", "infer", "symmetry", "simulate", "run-all"):
            assert cmd in result.output

    def test_missing_config_exits_2(self, tmp_path):
        result = run_cli("identify", "--config", str(tmp_path / "missing.json"))
        assert result.exit_code == 2

    def test_bad_data_path_exits_3(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"shocks_csv": str(tmp_path / "nope.csv"),
                                   "out_dir": str(tmp_path / "out")}))
        result = run_cli("identify", "--config", str(cfg))
        assert result.exit_code == 3

    def test_identify_passthrough_and_overrides(self, config_file, tmp_path):
        path, doc = config_file()
        other_out = tmp_path / "cli-out"
        result = run_cli("identify", "--config", str(path), "--out", str(other_out))
        assert result.exit_code == 0, result.output
        assert (other_out / "shocks.csv").exists()

    def test_full_stage_sequence(self, config_file):
        path, doc = config_file(symmetry_bootstrap=49)
        for stage in ("identify", "estimate", "infer", "symmetry"):
            result = run_cli(stage, "--config", str(path))
            assert result.exit_code == 0, f"{stage}: {result.output}"
        out = doc["out_dir"]
        for name in (
            "shocks.csv",
            "coefficients.json",
            "irf.csv",
            "table_sign_gamma.csv",
            "symmetry.json",
        ):
            assert os.path.exists(os.path.join(out, name)), name

    def test_criterion_override_changes_meta(self, config_file):
        path, doc = config_file()
        assert run_cli("identify", "--config", str(path)).exit_code == 0
        result = run_cli("estimate", "--config", str(path), "--criterion", "bic")
        assert result.exit_code == 0, result.output
        store = json.load(open(os.path.join(doc["out_dir"], "coefficients.json")))
        assert store["meta"]["criterion"] == "bic"
        assert os.path.exists(os.path.join(doc["out_dir"], "selection_bic_reer.csv"))

    def test_simulate_stage(self, sim_data_dir, tmp_path):
        cfg = tmp_path / "sim.json"
        out = tmp_path / "out"
        cfg.write_text(
            json.dumps(
                {
                    "model_spec": str(sim_data_dir / "model_spec.json"),
                    "out_dir": str(out),
                    "oracle_paths": 500,
                }
            )
        )
        result = run_cli("simulate", "--config", str(cfg), "--seed", "3")
        assert result.exit_code == 0, result.output
        assert (out / "panel.csv").exists()
        assert (out / "oracle_irf.csv").exists()

    def test_window_override(self, config_file):
        path, doc = config_file()
        result = run_cli(
            "identify", "--config", str(path), "--window", "2000-03:2000-12"
        )
        assert result.exit_code == 0, result.output
        shocks = pd.read_csv(os.path.join(doc["out_dir"], "shocks.csv"))
        assert list(shocks["month"])[0] == "2000-03"
        assert len(shocks) == 10
