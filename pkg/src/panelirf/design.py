"""Pooled-panel local-projection design matrices.

A design stacks rows over (country, month) for one outcome and one horizon.
Columns, in the order inference relies on: contemporaneous shocks, then
contemporaneous transformed shocks when a non-linear transform is present,
shock lags, transformed-shock lags, own-outcome-vector lags, euro-control
lags, trend terms, and one intercept dummy per country (no global
intercept).  A row enters only if every term exists inside the country's
window (listwise deletion per horizon; no imputation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DataError
from .nonlinear import ShockTransform, transform_eval
from .panel import CalendarMonth, PanelDataset, ShockSeries, SHOCK_KINDS


@dataclass(frozen=True)
class LagOrder:
    """Shock, own-outcome-vector and euro-control lag orders."""

    p: int
    q: int
    r: int

    def __post_init__(self):
        if min(self.p, self.q, self.r) < 0:
            raise DataError(f"lag orders must be non-negative, got {self}")


@dataclass(frozen=True)
class TrendSpec:
    """Linear / quadratic time-trend flags; the quadratic needs the linear."""

    linear: bool = False
    quadratic: bool = False

    @property
    def active_quadratic(self) -> bool:
        return self.linear and self.quadratic

    def n_terms(self) -> int:
        return int(self.linear) + int(self.active_quadratic)


@dataclass(frozen=True)
class LpSpec:
    """One local-projection design: outcome, horizon, lags, trend, transform.

    ``transform`` maps shock kind to a :class:`ShockTransform`; ``None``
    selects the linear specification.
    """

    outcome: str
    horizon: int
    lags: LagOrder
    trend: TrendSpec = TrendSpec()
    transform: Mapping[str, ShockTransform] | None = None

    def __post_init__(self):
        if self.horizon < 0:
            raise DataError(f"horizon must be non-negative, got {self.horizon}")


@dataclass
class Design:
    """Stacked design for one LpSpec."""

    X: np.ndarray
    y: np.ndarray
    column_names: list[str]
    cluster_ids: np.ndarray
    rows: list[tuple[str, CalendarMonth]] = field(repr=False)


def shock_column(kind: str, lag: int) -> str:
    return f"shock:{kind}:l{lag}"


def fx_column(kind: str, lag: int) -> str:
    return f"fx:{kind}:l{lag}"


def build_design(
    panel: PanelDataset,
    shocks: Mapping[str, ShockSeries],
    spec: LpSpec,
    cluster_by: str = "country",
) -> Design:
    """Assemble the stacked (X, y) system for ``spec``.

    ``cluster_by`` is ``country`` (default) or ``month``; it only affects
    the cluster labels attached to the rows.
    """
    if spec.outcome not in panel.outcome_variables:
        raise DataError(f"unknown outcome variable {spec.outcome!r}")
    if cluster_by not in ("country", "month"):
        raise DataError(f"cluster_by must be 'country' or 'month', got {cluster_by!r}")
    kinds = [k for k in SHOCK_KINDS if k in shocks]
    if not kinds:
        raise DataError("no shock series supplied")
    transform = spec.transform
    if transform is not None:
        missing = [k for k in kinds if k not in transform]
        if missing:
            raise DataError(f"transform missing for shock kinds {missing}")

    p, q, r = spec.lags.p, spec.lags.q, spec.lags.r
    h = spec.horizon
    controls = sorted(panel.euro_controls)
    if r > 0 and not controls:
        raise DataError("design requests euro-control lags but the panel has none")
    origin = panel.window[0]

    blocks: list[np.ndarray] = []
    y_parts: list[np.ndarray] = []
    cluster_parts: list[np.ndarray] = []
    rows: list[tuple[str, CalendarMonth]] = []
    per_country_count: dict[str, int] = {}

    z_start = max((panel.euro_controls[c].start for c in controls), default=None)
    z_end = min((panel.euro_controls[c].end for c in controls), default=None)
    x_start = max(shocks[k].start for k in kinds)
    x_end = min(shocks[k].end for k in kinds)

    for country in panel.country_names:
        entry, exit_ = panel.country_window(country)
        tmin = entry.shift(q)
        lo = x_start.shift(p)
        if lo > tmin:
            tmin = lo
        if r > 0 and z_start is not None:
            lo = z_start.shift(r)
            if lo > tmin:
                tmin = lo
        tmax = exit_.shift(-h)
        if x_end < tmax:
            tmax = x_end
        if r > 0 and z_end is not None and z_end < tmax:
            tmax = z_end
        if tmax < tmin:
            continue
        n_t = tmax.months_since(tmin) + 1
        months = [tmin.shift(i) for i in range(n_t)]

        def window_slice(series, first: CalendarMonth, count: int) -> np.ndarray:
            i0 = first.months_since(series.start)
            return np.asarray(series.values[i0 : i0 + count], dtype=float)

        cols: list[np.ndarray] = []
        # contemporaneous shocks and transforms first: the inference layout
        # depends on these leading positions
        x_at = {
            (k, lag): window_slice(shocks[k], tmin.shift(-lag), n_t)
            for k in kinds
            for lag in range(p + 1)
        }
        cols.extend(x_at[(k, 0)] for k in kinds)
        if transform is not None:
            cols.extend(transform_eval(transform[k], x_at[(k, 0)]) for k in kinds)
        for lag in range(1, p + 1):
            cols.extend(x_at[(k, lag)] for k in kinds)
        if transform is not None:
            for lag in range(1, p + 1):
                cols.extend(transform_eval(transform[k], x_at[(k, lag)]) for k in kinds)
        for lag in range(1, q + 1):
            for var in panel.outcome_variables:
                cols.append(window_slice(panel.countries[country][var], tmin.shift(-lag), n_t))
        for lag in range(1, r + 1):
            for ctrl in controls:
                cols.append(window_slice(panel.euro_controls[ctrl], tmin.shift(-lag), n_t))
        t_vals = np.array([m.months_since(origin) for m in months], dtype=float)
        if spec.trend.linear:
            cols.append(t_vals)
        if spec.trend.active_quadratic:
            cols.append(t_vals**2)

        blocks.append(np.column_stack(cols))
        y_parts.append(
            window_slice(panel.countries[country][spec.outcome], tmin.shift(h), n_t)
        )
        if cluster_by == "country":
            cluster_parts.append(np.repeat(country, n_t))
        else:
            cluster_parts.append(np.array([str(m) for m in months]))
        rows.extend((country, m) for m in months)
        per_country_count[country] = n_t

    if not blocks:
        raise DataError(
            f"no eligible rows for outcome {spec.outcome!r} at horizon {h}"
        )

    names: list[str] = [shock_column(k, 0) for k in kinds]
    if transform is not None:
        names += [fx_column(k, 0) for k in kinds]
    for lag in range(1, p + 1):
        names += [shock_column(k, lag) for k in kinds]
    if transform is not None:
        for lag in range(1, p + 1):
            names += [fx_column(k, lag) for k in kinds]
    for lag in range(1, q + 1):
        names += [f"ylag:{var}:l{lag}" for var in panel.outcome_variables]
    for lag in range(1, r + 1):
        names += [f"zlag:{ctrl}:l{lag}" for ctrl in controls]
    if spec.trend.linear:
        names.append("trend:t")
    if spec.trend.active_quadratic:
        names.append("trend:t2")

    fe_countries = [c for c in panel.country_names if c in per_country_count]
    X_core = np.vstack(blocks)
    fe = np.zeros((X_core.shape[0], len(fe_countries)))
    offset = 0
    for j, c in enumerate(fe_countries):
        n_t = per_country_count[c]
        fe[offset : offset + n_t, j] = 1.0
        offset += n_t
    names += [f"fe:{c}" for c in fe_countries]

    return Design(
        X=np.hstack([X_core, fe]),
        y=np.concatenate(y_parts),
        column_names=names,
        cluster_ids=np.concatenate(cluster_parts),
        rows=rows,
    )
