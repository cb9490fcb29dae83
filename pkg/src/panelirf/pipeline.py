"""Batch pipeline stages: identify, estimate, infer, symmetry, simulate.

Stages communicate only through files in the output directory, so any
stage can be rerun in isolation.  Every figure written by a stage has a
sibling CSV with exactly the plotted numbers.
"""

from __future__ import annotations

import dataclasses
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import figures
from .design import LpSpec, fx_column, shock_column
from .dgp import read_model_spec, simulate, true_irf_oracle
from .errors import ConfigError, DataError
from .estimation import FitResult, fit_projection
from .factors import (
    DEFAULT_RESTRICTIONS,
    estimate_factor_mle,
    identify_factors,
    read_surprise_csv,
)
from .inference import (
    CONDITIONAL_NEG,
    CONDITIONAL_POS,
    GAMMA_ONLY,
    PLUGIN_IRF,
    build_restriction,
    significance_table,
    wald_test,
)
from .nonlinear import (
    ABS_VALUE,
    DEFAULT_SCALE_GRID,
    THRESHOLD_SHIFT,
    ShockTransform,
    ar1_check,
    conditional_irfs,
    estimate_A,
    scaled_irf_family,
    threshold_from_quantile,
    unconditional_irf,
)
from .panel import (
    CalendarMonth,
    PanelDataset,
    SHOCK_KINDS,
    ShockSeries,
    assign_shocks_to_months,
    read_panel_csv,
    read_reassignment_csv,
    read_shock_csv,
    read_shock_events_csv,
    write_panel_csv,
    write_shock_csv,
)
from .selection import PENALTY_PAPER, select_all_horizons, selection_table
from .symmetry import DEFAULT_BOOTSTRAP, symmetry_report

SELECTION_MAX_HORIZON = 24


@dataclass
class PipelineConfig:
    """Run configuration; file inputs plus estimation and output options."""

    out_dir: str = "out"
    panel_csv: str | None = None
    surprises_csv: str | None = None
    shocks_csv: str | None = None
    reassignment_csv: str | None = None
    model_spec: str | None = None
    window: tuple[CalendarMonth, CalendarMonth] | None = None
    horizons: int = 25
    criterion: str = "aic"
    penalty: str = PENALTY_PAPER
    cluster_by: str = "country"
    coverage: float = 0.6
    n_draws: int = 100_000
    seed: int = 0
    scale_grid: tuple[float, ...] = DEFAULT_SCALE_GRID
    selection_lag_grid: tuple[int, ...] = (2, 3, 4, 5, 6)
    log_point_variables: tuple[str, ...] = ("reer", "cpi", "industrial_production")
    deseasonalize_variables: tuple[str, ...] = ("unemployment",)
    delta_sample: str = "conference"
    a_hat_conference_only: bool = False
    scaled_simplified: bool = False
    symmetry_bootstrap: int = DEFAULT_BOOTSTRAP
    sim_periods: int = 600
    sim_countries: int = 5
    sim_burn_in: int = 500
    oracle_horizon: int = 12
    oracle_paths: int = 20_000
    oracle_delta: float = 1.0

    def __post_init__(self):
        if self.surprises_csv and self.shocks_csv:
            raise ConfigError("provide either a surprise CSV or a shock CSV, not both")
        if self.window is not None and self.window[1] < self.window[0]:
            raise ConfigError(f"empty sample window {self.window[0]}..{self.window[1]}")
        if self.criterion not in ("aic", "bic"):
            raise ConfigError(f"criterion must be aic or bic, got {self.criterion!r}")
        if self.cluster_by not in ("country", "month"):
            raise ConfigError("cluster must be 'country' or 'month'")
        if self.delta_sample not in ("conference", "all"):
            raise ConfigError("delta_sample must be 'conference' or 'all'")
        if not 0.0 < self.coverage < 1.0:
            raise ConfigError("coverage must lie strictly between 0 and 1")
        if self.horizons < 0:
            raise ConfigError("horizons must be non-negative")


def parse_window(text: str) -> tuple[CalendarMonth, CalendarMonth]:
    try:
        lo, hi = text.split(":")
    except ValueError as exc:
        raise ConfigError(f"window must be YYYY-MM:YYYY-MM, got {text!r}") from exc
    return CalendarMonth.parse(lo), CalendarMonth.parse(hi)


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if "window" in doc and doc["window"] is not None:
        doc["window"] = parse_window(doc["window"])
    for key in ("scale_grid", "selection_lag_grid", "log_point_variables",
                "deseasonalize_variables"):
        if key in doc and doc[key] is not None:
            doc[key] = tuple(doc[key])
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    return PipelineConfig(**doc)


def _out_path(config: PipelineConfig, name: str) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"missing input path for {what}")
    if not os.path.exists(path):
        raise DataError(f"{what} file not found: {path}")
    return path


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# identify
# ---------------------------------------------------------------------------


def _events_window(events_by_kind) -> tuple[CalendarMonth, CalendarMonth]:
    months = [
        CalendarMonth.from_date(date)
        for events in events_by_kind.values()
        for date, _ in events
    ]
    if not months:
        raise DataError("no shock events supplied")
    return min(months), max(months)


def run_identify(config: PipelineConfig) -> dict:
    """Produce the monthly shock CSV, identifying factors when needed."""
    reassign = (
        read_reassignment_csv(_require_file(config.reassignment_csv, "reassignment map"))
        if config.reassignment_csv
        else {}
    )
    report: dict = {"seed": config.seed}

    if config.surprises_csv:
        surprises = read_surprise_csv(_require_file(config.surprises_csv, "surprises"))
        model = estimate_factor_mle(surprises)
        ident = identify_factors(
            model, DEFAULT_RESTRICTIONS, n_draws=config.n_draws, seed=config.seed
        )
        events_by_kind = {
            kind: list(zip(surprises.dates, ident.factors[:, i]))
            for i, kind in enumerate(SHOCK_KINDS)
        }
        report.update(
            {
                "acceptance_rate": ident.acceptance_rate,
                "accepted": ident.accepted,
                "n_draws": ident.n_draws,
                "lambda": model.loadings.tolist(),
                "specific_variances": model.specific_variances.tolist(),
                "q_star": ident.rotation.tolist(),
                "rotated_loadings": ident.rotated_loadings.tolist(),
                "em_converged": model.converged,
                "heywood": model.heywood,
            }
        )
    elif config.shocks_csv:
        path = _require_file(config.shocks_csv, "shocks")
        header = pd.read_csv(path, nrows=0).columns
        if "month" in header:
            shocks = read_shock_csv(path)
            if config.window is not None:
                shocks = {
                    k: s.slice_window(*config.window) for k, s in shocks.items()
                }
            write_shock_csv(shocks, _out_path(config, "shocks.csv"))
            report["source"] = "monthly_passthrough"
            _write_json(report, _out_path(config, "identification.json"))
            return report
        events_by_kind = read_shock_events_csv(path)
        report["source"] = "event_values"
    else:
        raise ConfigError("identify needs either a surprise CSV or a shock CSV")

    window = config.window or _events_window(events_by_kind)
    shocks = {
        kind: assign_shocks_to_months(events, window, reassign, kind)
        for kind, events in events_by_kind.items()
    }
    write_shock_csv(shocks, _out_path(config, "shocks.csv"))
    _write_json(report, _out_path(config, "identification.json"))
    return report


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _prepare_panel(config: PipelineConfig) -> PanelDataset:
    from .panel import deseasonalize_monthly, to_log_points

    panel = read_panel_csv(_require_file(config.panel_csv, "panel"))
    if config.window is not None:
        panel = panel.restrict_window(*config.window)
    for var in config.log_point_variables:
        if var in panel.outcome_variables or var in panel.euro_controls:
            panel = panel.map_series(var, to_log_points)
    for var in config.deseasonalize_variables:
        if var in panel.outcome_variables or var in panel.euro_controls:
            panel = panel.map_series(var, deseasonalize_monthly)
    return panel


def _load_aligned_shocks(
    config: PipelineConfig, panel: PanelDataset
) -> tuple[PanelDataset, dict[str, ShockSeries]]:
    shocks = read_shock_csv(_require_file(_out_path(config, "shocks.csv"), "monthly shocks"))
    base = next(iter(shocks.values()))
    lo = max(panel.window[0], base.start)
    hi = min(panel.window[1], base.end)
    if hi < lo:
        raise DataError("panel window and shock series do not overlap")
    panel = panel.restrict_window(lo, hi)
    shocks = {k: s.slice_window(*panel.window) for k, s in shocks.items()}
    return panel, shocks


def _delta_for(config: PipelineConfig, series: ShockSeries) -> float:
    x = series.conference_values() if config.delta_sample == "conference" else series.values
    if x.size < 2:
        raise DataError(f"not enough shock observations to size delta for {series.kind}")
    return float(np.std(x, ddof=1))


@dataclass
class _SpecFits:
    """Per-horizon fits of one specification for one outcome."""

    label: str
    fits: list[FitResult] = field(default_factory=list)

    def psi(self, kind: str) -> np.ndarray:
        return np.array([f.coef(shock_column(kind, 0)) for f in self.fits])

    def gamma(self, kind: str) -> np.ndarray:
        return np.array([f.coef(fx_column(kind, 0)) for f in self.fits])

    def psi_se(self, kind: str) -> np.ndarray:
        return np.array([f.stderr(shock_column(kind, 0)) for f in self.fits])


def _fit_block_record(fit: FitResult, h: int, kinds, with_gamma: bool) -> dict:
    names = [shock_column(k, 0) for k in kinds]
    if with_gamma:
        names += [fx_column(k, 0) for k in kinds]
    rec = {
        "h": h,
        "psi": {k: fit.coef(shock_column(k, 0)) for k in kinds},
        "n_obs": fit.n_obs,
        "n_params": fit.n_params,
        "layout": names,
        "cov": fit.cov_block(names).tolist(),
    }
    if with_gamma:
        rec["gamma"] = {k: fit.coef(fx_column(k, 0)) for k in kinds}
    return rec


def run_estimate(config: PipelineConfig) -> dict:
    """Selection, the three specifications per (outcome, horizon), IRFs, figures."""
    panel = _prepare_panel(config)
    panel, shocks = _load_aligned_shocks(config, panel)
    kinds = [k for k in SHOCK_KINDS if k in shocks]
    outcomes = list(panel.outcome_variables)
    horizon_top = config.horizons

    ar1 = {}
    for k in kinds:
        ar1[k] = ar1_check(shocks[k].values)
        if abs(ar1[k]["coefficient"]) >= 0.1 or ar1[k]["p_value"] < 0.05:
            warnings.warn(
                f"shock {k} shows serial correlation "
                f"(coef {ar1[k]['coefficient']:.3f}, p {ar1[k]['p_value']:.3f}); "
                "the plug-in construction assumes white-noise shocks",
                RuntimeWarning,
            )

    delta = {k: _delta_for(config, shocks[k]) for k in kinds}
    b_bar = {k: threshold_from_quantile(shocks[k], config.coverage) for k in kinds}
    sign_tr = {k: ShockTransform(ABS_VALUE) for k in kinds}
    size_tr = {k: ShockTransform(THRESHOLD_SHIFT, b_bar[k]) for k in kinds}
    a_sign = {
        k: estimate_A(shocks[k], delta[k], sign_tr[k], config.a_hat_conference_only).a_hat
        for k in kinds
    }
    a_size = {
        k: estimate_A(shocks[k], delta[k], size_tr[k], config.a_hat_conference_only).a_hat
        for k in kinds
    }

    store: dict = {
        "meta": {
            "criterion": config.criterion,
            "penalty": config.penalty,
            "cluster_by": config.cluster_by,
            "horizons": horizon_top,
            "coverage": config.coverage,
            "outcomes": outcomes,
            "shocks": kinds,
            "delta": delta,
            "a_sign": a_sign,
            "a_size": a_size,
            "b_bar": b_bar,
            "ar1": ar1,
            "window": [str(panel.window[0]), str(panel.window[1])],
        },
        "selection": {},
        "fits": {},
    }

    irf_rows = []
    fig_linear = []
    fig_overlay_sign = []
    fig_conditional = []
    fig_overlay_size = []
    fig_scaled = []

    for outcome in outcomes:
        sel = select_all_horizons(
            panel,
            shocks,
            outcome,
            min(horizon_top, SELECTION_MAX_HORIZON),
            criterion=config.criterion,
            penalty=config.penalty,
            lag_grid=config.selection_lag_grid,
        )
        selection_table(sel).to_csv(
            _out_path(config, f"selection_{config.criterion}_{outcome}.csv")
        )
        store["selection"][outcome] = {
            str(h): [s.p, s.q, s.r, s.i1, s.i2]
            for h, s in sorted(sel.by_horizon.items())
        }

        by_spec = {
            "linear": _SpecFits("linear"),
            "sign": _SpecFits("sign"),
            "size": _SpecFits("size"),
        }
        records = {"linear": [], "sign": [], "size": []}
        for h in range(horizon_top + 1):
            chosen = sel.spec_for(h)
            base = dict(
                outcome=outcome,
                horizon=h,
                lags=chosen.lags,
                trend=chosen.trend,
            )
            for label, transform in (
                ("linear", None),
                ("sign", sign_tr),
                ("size", size_tr),
            ):
                fit = fit_projection(
                    panel,
                    shocks,
                    LpSpec(transform=transform, **base),
                    cluster_by=config.cluster_by,
                )
                by_spec[label].fits.append(fit)
                records[label].append(
                    _fit_block_record(fit, h, kinds, with_gamma=transform is not None)
                )
        store["fits"][outcome] = records

        for k in kinds:
            lin = by_spec["linear"]
            lin_curve = unconditional_irf(
                lin.psi(k), None, delta[k], 0.0, shock=k, outcome=outcome,
                spec_label="linear",
            )
            sign_curve = unconditional_irf(
                by_spec["sign"].psi(k), by_spec["sign"].gamma(k), delta[k],
                a_sign[k], shock=k, outcome=outcome, spec_label="sign",
            )
            size_curve = unconditional_irf(
                by_spec["size"].psi(k), by_spec["size"].gamma(k), delta[k],
                a_size[k], shock=k, outcome=outcome, spec_label="size",
            )
            pos, neg = conditional_irfs(
                by_spec["sign"].psi(k), by_spec["sign"].gamma(k),
                shock=k, outcome=outcome,
            )
            scaled = scaled_irf_family(
                by_spec["size"].psi(k), by_spec["size"].gamma(k), shocks[k],
                size_tr[k], delta[k], config.scale_grid, shock=k, outcome=outcome,
                simplified=config.scaled_simplified,
                conference_only=config.a_hat_conference_only,
            )
            for curve in (lin_curve, sign_curve, size_curve, pos, neg, *scaled):
                for h, v in enumerate(curve.values):
                    irf_rows.append(
                        {
                            "shock": k,
                            "outcome": outcome,
                            "spec": curve.spec_label,
                            "flavor": curve.flavor,
                            "h": h,
                            "value": v,
                            "delta": curve.delta,
                        }
                    )
            se_lin = lin.psi_se(k) * delta[k]
            for h in range(horizon_top + 1):
                fig_linear.append(
                    {
                        "outcome": outcome, "shock": k, "h": h,
                        "value": lin_curve.values[h], "se": se_lin[h],
                    }
                )
                fig_overlay_sign.append(
                    {
                        "outcome": outcome, "shock": k, "h": h,
                        "linear": lin_curve.values[h],
                        "nonlinear": sign_curve.values[h],
                    }
                )
                fig_conditional.append(
                    {
                        "outcome": outcome, "shock": k, "h": h,
                        "positive": pos.values[h],
                        "negative_flipped": -neg.values[h],
                    }
                )
                fig_overlay_size.append(
                    {
                        "outcome": outcome, "shock": k, "h": h,
                        "linear": lin_curve.values[h],
                        "nonlinear": size_curve.values[h],
                    }
                )
            for curve, a in zip(scaled, config.scale_grid):
                for h in range(horizon_top + 1):
                    fig_scaled.append(
                        {
                            "outcome": outcome, "shock": k, "scale": a,
                            "h": h, "value": curve.values[h],
                        }
                    )

    pd.DataFrame.from_records(irf_rows).to_csv(_out_path(config, "irf.csv"), index=False)
    _write_json(store, _out_path(config, "coefficients.json"))

    def emit(records, name, renderer, **kwargs):
        frame = pd.DataFrame.from_records(records)
        frame.to_csv(_out_path(config, f"{name}.csv"), index=False)
        renderer(frame, _out_path(config, f"{name}.svg"), outcomes, kinds, **kwargs)

    emit(fig_linear, "fig1_linear", figures.save_banded_irf_grid)
    emit(
        fig_overlay_sign, "fig2_sign_unconditional", figures.save_irf_grid,
        series=[("linear", "red", "linear"), ("nonlinear", "blue", "sign plug-in")],
    )
    emit(
        fig_conditional, "fig3_sign_conditional", figures.save_irf_grid,
        series=[
            ("positive", "blue", "positive shock"),
            ("negative_flipped", "red", "negative shock (flipped)"),
        ],
    )
    emit(
        fig_overlay_size, "fig4_size_unconditional", figures.save_irf_grid,
        series=[("linear", "red", "linear"), ("nonlinear", "blue", "size plug-in")],
    )
    emit(
        fig_scaled, "fig5_size_scaled", figures.save_scaled_family_grid,
        scales=config.scale_grid,
    )
    return store


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------

_FAMILIES = (
    ("sign_gamma", "sign", GAMMA_ONLY),
    ("size_gamma", "size", GAMMA_ONLY),
    ("sign_plugin", "sign", PLUGIN_IRF),
    ("size_plugin", "size", PLUGIN_IRF),
    ("conditional_pos", "sign", CONDITIONAL_POS),
    ("conditional_neg", "sign", CONDITIONAL_NEG),
)


def run_infer(config: PipelineConfig) -> dict[str, pd.DataFrame]:
    """The six banded Wald-test tables from the stored coefficients."""
    path = _out_path(config, "coefficients.json")
    if not os.path.exists(path):
        raise DataError("coefficient store not found; run the estimate stage first")
    with open(path) as fh:
        store = json.load(fh)
    meta = store["meta"]
    outcomes = meta["outcomes"]
    kinds = meta["shocks"]
    horizons = list(range(meta["horizons"] + 1))

    tables = {}
    for family, spec_label, r_kind in _FAMILIES:
        results = {}
        for outcome in outcomes:
            fit_records = store["fits"][outcome][spec_label]
            by_h = {rec["h"]: rec for rec in fit_records}
            for h in horizons:
                if h not in by_h:
                    raise DataError(f"missing fit for {(outcome, spec_label, h)}")
                rec = by_h[h]
                layout = rec["layout"]
                beta = np.array(
                    [rec["psi"][k] for k in kinds] + [rec["gamma"][k] for k in kinds]
                )
                omega = np.array(rec["cov"])
                for k in kinds:
                    if r_kind == PLUGIN_IRF:
                        a_key = "a_sign" if spec_label == "sign" else "a_size"
                        restriction = build_restriction(
                            r_kind, k, layout,
                            delta=meta["delta"][k], a_hat=meta[a_key][k],
                        )
                    else:
                        restriction = build_restriction(r_kind, k, layout)
                    results[(outcome, k, h)] = wald_test(restriction, beta, omega)
        table = significance_table(results, outcomes, kinds, horizons)
        table.to_csv(_out_path(config, f"table_{family}.csv"), index=False)
        figures.save_significance_table(
            table, _out_path(config, f"table_{family}.svg"), outcomes, kinds,
            title=family.replace("_", " "),
        )
        tables[family] = table
    return tables


# ---------------------------------------------------------------------------
# symmetry and simulate
# ---------------------------------------------------------------------------


def run_symmetry(config: PipelineConfig) -> dict:
    """Summary statistics, symmetry tests and histograms of the shocks."""
    shocks = read_shock_csv(_require_file(_out_path(config, "shocks.csv"), "monthly shocks"))
    report = symmetry_report(shocks, n_boot=config.symmetry_bootstrap, seed=config.seed)
    _write_json(report, _out_path(config, "symmetry.json"))
    binned = figures.save_histograms(
        {k: s.conference_values() for k, s in shocks.items()},
        _out_path(config, "fig6_histograms.svg"),
    )
    binned.to_csv(_out_path(config, "fig6_histograms.csv"), index=False)
    return report


def run_simulate(config: PipelineConfig) -> dict:
    """Simulate the configured structural model; emit panel, shocks and oracle."""
    model, doc = read_model_spec(_require_file(config.model_spec, "model spec"))
    sim = simulate(
        model,
        periods=int(doc.get("periods", config.sim_periods)),
        n_countries=int(doc.get("n_countries", config.sim_countries)),
        seed=config.seed,
        burn_in=int(doc.get("burn_in", config.sim_burn_in)),
    )
    write_panel_csv(sim.to_panel_dataset(), _out_path(config, "panel.csv"))
    write_shock_csv(sim.to_shock_series(), _out_path(config, "shocks.csv"))

    oracle_doc = doc.get("oracle", {})
    horizon = int(oracle_doc.get("horizon", config.oracle_horizon))
    n_paths = int(oracle_doc.get("n_paths", config.oracle_paths))
    delta = float(oracle_doc.get("delta", config.oracle_delta))
    rows = []
    outcome_names = sim.to_panel_dataset().outcome_variables
    for i, kind in enumerate(SHOCK_KINDS):
        oracle = true_irf_oracle(
            model, i, delta, horizon, n_paths=n_paths, seed=config.seed
        )
        for j, outcome in enumerate(outcome_names):
            for h in range(horizon + 1):
                rows.append(
                    {
                        "shock": kind,
                        "outcome": outcome,
                        "h": h,
                        "value": oracle.values[h, j],
                        "se": oracle.se[h, j],
                        "delta": delta,
                    }
                )
    pd.DataFrame.from_records(rows).to_csv(
        _out_path(config, "oracle_irf.csv"), index=False
    )
    return {"periods": sim.periods, "n_countries": sim.y.shape[0]}


def run_all(config: PipelineConfig) -> None:
    run_identify(config)
    run_estimate(config)
    run_infer(config)
    run_symmetry(config)
