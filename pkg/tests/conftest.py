import json

import numpy as np
import pytest

from panelirf.dgp import build_model, simulate
from panelirf.panel import write_panel_csv, write_shock_csv


def pipeline_model():
    a22 = np.array([[0.5, 0.0], [0.1, 0.3]])
    return build_model(
        n_y=2,
        n_z=2,
        a0_y_x=[[0.4, 0.1, -0.2], [0.0, 0.3, 0.1]],
        lags_y_x=[[[0.15, 0.0, 0.05], [0.0, 0.1, 0.0]]],
        lags_y_y=[a22],
        lags_z_z=[0.3 * np.eye(2)],
        sigma_yy=np.eye(2),
        sigma_zz=np.eye(2),
    )


MODEL_SPEC = {
    "n_y": 2,
    "n_z": 2,
    "a0": {"y_x": [[0.4, 0.1, -0.2], [0.0, 0.3, 0.1]]},
    "lags": {
        "y_x": [[[0.15, 0.0, 0.05], [0.0, 0.1, 0.0]]],
        "y_y": [[[0.5, 0.0], [0.1, 0.3]]],
        "z_z": [[[0.3, 0.0], [0.0, 0.3]]],
    },
    "sigma": {"yy": [[1.0, 0.0], [0.0, 1.0]], "zz": [[1.0, 0.0], [0.0, 1.0]]},
    "transform": {"kind": "identity"},
    "periods": 150,
    "n_countries": 3,
    "burn_in": 100,
    "oracle": {"delta": 1.0, "horizon": 4, "n_paths": 2000},
}


@pytest.fixture(scope="session")
def sim_data_dir(tmp_path_factory):
    """Simulated panel + shock CSVs shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("simdata")
    sim = simulate(pipeline_model(), periods=200, n_countries=3, seed=8, burn_in=100)
    write_panel_csv(sim.to_panel_dataset(), root / "panel.csv")
    write_shock_csv(sim.to_shock_series(), root / "shocks.csv")
    with open(root / "model_spec.json", "w") as fh:
        json.dump(MODEL_SPEC, fh)
    return root


def base_config(sim_data_dir, out_dir, **overrides):
    doc = {
        "panel_csv": str(sim_data_dir / "panel.csv"),
        "shocks_csv": str(sim_data_dir / "shocks.csv"),
        "out_dir": str(out_dir),
        "horizons": 3,
        "selection_lag_grid": [2, 3],
        "log_point_variables": [],
        "deseasonalize_variables": [],
        "symmetry_bootstrap": 99,
        "seed": 5,
    }
    doc.update(overrides)
    return doc


@pytest.fixture()
def config_file(sim_data_dir, tmp_path):
    def make(**overrides):
        out_dir = overrides.pop("out_dir", tmp_path / "out")
        doc = base_config(sim_data_dir, out_dir, **overrides)
        path = tmp_path / "config.json"
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return path, doc

    return make
