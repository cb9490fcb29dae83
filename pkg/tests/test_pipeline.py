import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from panelirf.errors import ConfigError, DataError
from panelirf.factors import INSTRUMENT_COLUMNS
from panelirf.panel import read_shock_csv
from panelirf.pipeline import (
    PipelineConfig,
    load_config,
    parse_window,
    run_all,
    run_estimate,
    run_identify,
    run_infer,
    run_simulate,
    run_symmetry,
)

from .test_factors import LAM0


def surprise_csv(path, T=300, seed=21):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((T, 3))
    X = f @ LAM0.T + 0.1 * rng.standard_normal((T, 8))
    dates = pd.date_range("2002-01-15", periods=T, freq="MS").strftime("%Y-%m-%d")
    df = pd.DataFrame(X, columns=list(INSTRUMENT_COLUMNS))
    df.insert(0, "date", dates)
    df.to_csv(path, index=False)


class TestConfig:
    def test_exclusive_shock_inputs(self):
        with pytest.raises(ConfigError, match="not both"):
            PipelineConfig(surprises_csv="a.csv", shocks_csv="b.csv")

    def test_empty_window_rejected(self):
        with pytest.raises(ConfigError, match="window"):
            PipelineConfig(window=parse_window("2020-01:2019-01"))

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"horizon": 3}))
        with pytest.raises(ConfigError, match="unknown config keys"):
            load_config(str(path))

    def test_missing_config_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/config.json")


class TestIdentify:
    def test_monthly_passthrough(self, config_file):
        path, doc = config_file()
        config = load_config(str(path))
        run_identify(config)
        shocks = read_shock_csv(os.path.join(doc["out_dir"], "shocks.csv"))
        assert set(shocks) == {"monetary", "information", "spread"}
        report = json.load(open(os.path.join(doc["out_dir"], "identification.json")))
        assert report["source"] == "monthly_passthrough"

    def test_surprise_identification(self, config_file, tmp_path):
        spath = tmp_path / "surprises.csv"
        surprise_csv(spath)
        path, doc = config_file(
            shocks_csv=None, surprises_csv=str(spath), n_draws=20_000
        )
        config = load_config(str(path))
        run_identify(config)
        report = json.load(open(os.path.join(doc["out_dir"], "identification.json")))
        assert report["acceptance_rate"] > 0.0
        assert report["n_draws"] == 20_000
        shocks = read_shock_csv(os.path.join(doc["out_dir"], "shocks.csv"))
        for s in shocks.values():
            sd = s.conference_values().std(ddof=1)
            assert sd == pytest.approx(1.0, abs=0.01)

    def test_event_value_input(self, config_file, tmp_path):
        epath = tmp_path / "events.csv"
        pd.DataFrame(
            {
                "date": ["2004-01-08", "2004-02-05", "2004-04-01"],
                "monetary": [0.5, -0.2, 1.1],
                "information": [0.1, 0.2, -0.3],
                "spread": [0.0, 0.4, 0.2],
            }
        ).to_csv(epath, index=False)
        path, doc = config_file(
            shocks_csv=str(epath), window="2004-01:2004-06"
        )
        config = load_config(str(path))
        run_identify(config)
        shocks = read_shock_csv(os.path.join(doc["out_dir"], "shocks.csv"))
        assert len(shocks["monetary"]) == 6
        assert shocks["monetary"].values[0] == 0.5
        assert shocks["monetary"].filled[2]  # March had no event

    def test_missing_inputs_is_config_error(self, config_file):
        path, _ = config_file(shocks_csv=None)
        with pytest.raises(ConfigError, match="identify needs"):
            run_identify(load_config(str(path)))


class TestEstimateInferSymmetry:
    @pytest.fixture()
    def estimated(self, config_file):
        path, doc = config_file()
        config = load_config(str(path))
        run_identify(config)
        store = run_estimate(config)
        return config, doc, store

    def test_store_layout(self, estimated):
        config, doc, store = estimated
        assert store["meta"]["outcomes"] == ["reer", "unemployment"]
        fits = store["fits"]["reer"]
        assert set(fits) == {"linear", "sign", "size"}
        assert [rec["h"] for rec in fits["linear"]] == [0, 1, 2, 3]
        assert "gamma" not in fits["linear"][0]
        assert "gamma" in fits["sign"][0]

    def test_selection_tables_written(self, estimated):
        config, doc, _ = estimated
        for outcome in ("reer", "unemployment"):
            table = pd.read_csv(
                os.path.join(doc["out_dir"], f"selection_aic_{outcome}.csv"),
                index_col=0,
            )
            assert list(table.index) == ["q", "p", "r", "T"]

    def test_irf_csv_flavors(self, estimated):
        config, doc, _ = estimated
        irf = pd.read_csv(os.path.join(doc["out_dir"], "irf.csv"))
        assert set(irf["spec"]) == {"linear", "sign", "size"}
        flavors = set(irf["flavor"])
        assert {"unconditional", "conditional_pos", "conditional_neg"} <= flavors
        assert any(f.startswith("scaled(") for f in flavors)
        # every curve covers h = 0..3 with no gaps
        lens = irf.groupby(["shock", "outcome", "spec", "flavor"])["h"].agg(list)
        assert all(v == [0, 1, 2, 3] for v in lens)

    def test_figures_have_matching_csv(self, estimated):
        config, doc, _ = estimated
        run_infer(config)
        run_symmetry(config)
        svgs = [f for f in os.listdir(doc["out_dir"]) if f.endswith(".svg")]
        assert len(svgs) >= 11  # 5 estimate figures + 6 tables + histograms
        for svg in svgs:
            assert os.path.exists(
                os.path.join(doc["out_dir"], svg.replace(".svg", ".csv"))
            )

    def test_conditional_identities_in_outputs(self, estimated):
        config, doc, store = estimated
        irf = pd.read_csv(os.path.join(doc["out_dir"], "irf.csv"))
        sign = irf[irf["spec"] == "sign"]
        for (shock, outcome), group in sign.groupby(["shock", "outcome"]):
            pos = group[group["flavor"] == "conditional_pos"].sort_values("h")["value"].to_numpy()
            neg = group[group["flavor"] == "conditional_neg"].sort_values("h")["value"].to_numpy()
            fits = store["fits"][outcome]["sign"]
            psi = np.array([rec["psi"][shock] for rec in fits])
            gamma = np.array([rec["gamma"][shock] for rec in fits])
            assert_allclose(pos - neg, 2.0 * psi, atol=1e-12)
            assert_allclose((pos + neg) / 2.0, gamma, atol=1e-12)

    def test_infer_tables(self, estimated):
        config, doc, _ = estimated
        tables = run_infer(config)
        assert set(tables) == {
            "sign_gamma",
            "size_gamma",
            "sign_plugin",
            "size_plugin",
            "conditional_pos",
            "conditional_neg",
        }
        for name, table in tables.items():
            assert set(table.columns) == {"outcome", "shock", "h", "W", "p", "band"}
            assert len(table) == 2 * 3 * 4
            assert table["p"].between(0, 1).all()

    def test_infer_without_estimate_fails(self, config_file):
        path, _ = config_file(out_dir="nowhere-out")
        with pytest.raises(DataError, match="estimate stage"):
            run_infer(load_config(str(path)))

    def test_symmetry_report_written(self, estimated):
        config, doc, _ = estimated
        report = run_symmetry(config)
        on_disk = json.load(open(os.path.join(doc["out_dir"], "symmetry.json")))
        assert on_disk["seed"] == config.seed
        assert set(on_disk["shocks"]) == {"monetary", "information", "spread"}


class TestLinearDgpOverlay:
    def test_sign_spec_coincides_with_linear_on_linear_dgp(self, config_file):
        # the fixture DGP is linear, so the sign-specification plug-in IRF
        # and the linear IRF differ only by the noise term gamma * A_hat
        path, doc = config_file()
        config = load_config(str(path))
        run_identify(config)
        store = run_estimate(config)
        hits = total = 0
        for outcome, by_spec in store["fits"].items():
            kinds = store["meta"]["shocks"]
            for rec in by_spec["sign"]:
                layout = rec["layout"]
                cov = np.array(rec["cov"])
                for k in kinds:
                    i = layout.index(f"fx:{k}:l0")
                    se = np.sqrt(cov[i, i])
                    hits += abs(rec["gamma"][k]) < 4.0 * se
                    total += 1
        assert hits / total >= 0.8

    def test_planted_sign_effect_concentrates_green_cells(self, tmp_path):
        from panelirf.dgp import build_model, simulate
        from panelirf.nonlinear import ShockTransform
        from panelirf.panel import write_panel_csv, write_shock_csv

        model = build_model(
            n_y=1, n_z=1,
            a0_y_x=[[0.3, 0.0, 0.0]],
            lags_y_y=[[[0.3]]],
            lags_z_z=[[[0.2]]],
            impact_y=[[[0.6, 0.0, 0.0]]],
            sigma_yy=[[1.0]], sigma_zz=[[1.0]],
            transform=ShockTransform("abs_value"),
        )
        sim = simulate(model, periods=300, n_countries=2, seed=31, burn_in=100)
        write_panel_csv(sim.to_panel_dataset(), tmp_path / "panel.csv")
        write_shock_csv(sim.to_shock_series(), tmp_path / "shocks.csv")
        config = PipelineConfig(
            panel_csv=str(tmp_path / "panel.csv"),
            shocks_csv=str(tmp_path / "shocks.csv"),
            out_dir=str(tmp_path / "out"),
            horizons=2,
            selection_lag_grid=(2,),
            log_point_variables=(),
            deseasonalize_variables=(),
            cluster_by="month",
        )
        run_identify(config)
        run_estimate(config)
        tables = run_infer(config)
        sign_gamma = tables["sign_gamma"]
        planted = sign_gamma[sign_gamma["shock"] == "monetary"]
        others = sign_gamma[sign_gamma["shock"] != "monetary"]
        # the transform loads only at impact; the effect decays with horizon
        at_impact = planted[planted["h"] == 0]
        assert (at_impact["band"] == "strong").all()
        assert (others["band"] == "strong").mean() < 0.5
        assert (planted["band"] == "strong").sum() >= (others["band"] == "strong").sum()


class TestSimulate:
    def test_simulate_stage_outputs(self, sim_data_dir, tmp_path):
        out = tmp_path / "simout"
        config = PipelineConfig(
            out_dir=str(out),
            model_spec=str(sim_data_dir / "model_spec.json"),
            seed=4,
        )
        run_simulate(config)
        panel = pd.read_csv(out / "panel.csv")
        assert set(panel.columns) == {"country", "month", "variable", "value"}
        oracle = pd.read_csv(out / "oracle_irf.csv")
        assert set(oracle["shock"]) == {"monetary", "information", "spread"}
        assert oracle["h"].max() == 4
        # emitted files feed the estimation pipeline unchanged
        est_config = PipelineConfig(
            out_dir=str(out),
            panel_csv=str(out / "panel.csv"),
            horizons=1,
            selection_lag_grid=(2,),
            log_point_variables=(),
            deseasonalize_variables=(),
        )
        run_estimate(est_config)
        assert (out / "irf.csv").exists()


class TestReproducibility:
    def test_two_runs_identical_csv_bytes(self, sim_data_dir, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            doc = {
                "panel_csv": str(sim_data_dir / "panel.csv"),
                "shocks_csv": str(sim_data_dir / "shocks.csv"),
                "out_dir": str(out_dir),
                "horizons": 2,
                "selection_lag_grid": [2],
                "log_point_variables": [],
                "deseasonalize_variables": [],
                "symmetry_bootstrap": 49,
                "seed": 9,
            }
            config = PipelineConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()})
            run_all(config)
            outputs.append(out_dir)
        a_files = sorted(f for f in os.listdir(outputs[0]) if f.endswith((".csv", ".json")))
        b_files = sorted(f for f in os.listdir(outputs[1]) if f.endswith((".csv", ".json")))
        assert a_files == b_files and a_files
        for f in a_files:
            with open(outputs[0] / f, "rb") as fa, open(outputs[1] / f, "rb") as fb:
                assert fa.read() == fb.read(), f
