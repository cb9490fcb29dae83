"""Per-horizon AIC/BIC grid search over lag orders and trend terms.

The grid is {2..6}^3 for (p, q, r) crossed with the four trend flag
combinations.  All grid points are evaluated on one common estimation
sample (rows trimmed at the maximum grid lag) so criterion values are
comparable; the criterion is n * ln(SSR / n) plus a penalty that is either
the literal per-block count p + q + r + I1 + I1*I2 + 5 or the actual
number of fitted coefficients.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from .design import LagOrder, LpSpec, TrendSpec, build_design
from .errors import ConfigError, DataError, NumericalError
from .panel import PanelDataset, ShockSeries

LAG_GRID = (2, 3, 4, 5, 6)
FLAG_GRID = (0, 1)
PENALTY_PAPER = "paper"
PENALTY_COEFFICIENTS = "coefficients"


@dataclass(frozen=True)
class SelectedSpec:
    p: int
    q: int
    r: int
    i1: int
    i2: int
    criterion: float

    @property
    def lags(self) -> LagOrder:
        return LagOrder(self.p, self.q, self.r)

    @property
    def trend(self) -> TrendSpec:
        return TrendSpec(linear=bool(self.i1), quadratic=bool(self.i2))

    @property
    def trend_label(self) -> str:
        if self.i1 and self.i2:
            return "t2"
        if self.i1:
            return "t"
        return "0"


@dataclass
class SelectionResult:
    """Chosen (p, q, r, I1, I2) and criterion value per horizon."""

    outcome: str
    criterion: str
    by_horizon: dict[int, SelectedSpec]

    def spec_for(self, horizon: int) -> SelectedSpec:
        if horizon in self.by_horizon:
            return self.by_horizon[horizon]
        # inference tables run one horizon past the selection tables; reuse
        # the last selected specification
        return self.by_horizon[max(self.by_horizon)]


class _GridDesign:
    """Full-order design on the common sample, sliced per grid point."""

    def __init__(
        self,
        panel: PanelDataset,
        shocks: Mapping[str, ShockSeries],
        outcome: str,
        horizon: int,
        max_lag: int,
    ):
        spec = LpSpec(
            outcome=outcome,
            horizon=horizon,
            lags=LagOrder(max_lag, max_lag, max_lag),
            trend=TrendSpec(linear=True, quadratic=True),
            transform=None,
        )
        design = build_design(panel, shocks, spec)
        self.names = design.column_names
        self.y = design.y
        self.n = design.X.shape[0]
        # column scaling leaves every SSR unchanged and keeps the Gram
        # matrix well conditioned despite the raw t^2 column
        norms = np.linalg.norm(design.X, axis=0)
        norms[norms == 0.0] = 1.0
        self.X = design.X / norms
        self.gram = self.X.T @ self.X
        self.xty = self.X.T @ self.y
        self.yty = float(self.y @ self.y)
        self.max_lag = max_lag
        self._index: dict[str, int] = {name: i for i, name in enumerate(self.names)}
        self._kinds = [n.split(":")[1] for n in self.names if n.endswith(":l0")]
        self._controls = sorted({n.split(":")[1] for n in self.names if n.startswith("zlag:")})
        self._outcomes = [
            n.split(":")[1] for n in self.names if n.startswith("ylag:") and n.endswith(":l1")
        ]
        self._fe = [i for i, n in enumerate(self.names) if n.startswith("fe:")]

    def columns_for(self, p: int, q: int, r: int, i1: int, i2: int) -> list[int]:
        idx = [self._index[f"shock:{k}:l0"] for k in self._kinds]
        for lag in range(1, p + 1):
            idx += [self._index[f"shock:{k}:l{lag}"] for k in self._kinds]
        for lag in range(1, q + 1):
            idx += [self._index[f"ylag:{v}:l{lag}"] for v in self._outcomes]
        for lag in range(1, r + 1):
            idx += [self._index[f"zlag:{c}:l{lag}"] for c in self._controls]
        if i1:
            idx.append(self._index["trend:t"])
        if i1 and i2:
            idx.append(self._index["trend:t2"])
        return idx + self._fe

    def ssr(self, columns: list[int]) -> float:
        sub = np.ix_(columns, columns)
        try:
            coeffs = np.linalg.solve(self.gram[sub], self.xty[columns])
            ssr = self.yty - float(self.xty[columns] @ coeffs)
        except np.linalg.LinAlgError:
            coeffs, ssr_arr, *_ = np.linalg.lstsq(
                self.X[:, columns], self.y, rcond=None
            )
            resid = self.y - self.X[:, columns] @ coeffs
            ssr = float(resid @ resid)
        if ssr <= 0.0:
            # exact fit is a degenerate selection sample
            raise NumericalError("zero residual sum of squares in grid search")
        return ssr


def _penalty_count(p, q, r, i1, i2, n_cols, mode: str) -> float:
    if mode == PENALTY_PAPER:
        return p + q + r + i1 + i1 * i2 + 5
    if mode == PENALTY_COEFFICIENTS:
        return n_cols
    raise ConfigError(f"unknown penalty mode {mode!r}")


def _select(
    panel: PanelDataset,
    shocks: Mapping[str, ShockSeries],
    outcome: str,
    horizon: int,
    criterion: str,
    penalty: str,
    lag_grid: tuple[int, ...],
) -> SelectedSpec:
    grid = _GridDesign(panel, shocks, outcome, horizon, max(lag_grid))
    if grid.n <= len(grid.names):
        raise DataError(
            f"grid search infeasible at horizon {horizon}: {grid.n} common rows "
            f"for {len(grid.names)} columns"
        )
    weight = 2.0 if criterion == "aic" else math.log(grid.n)
    best: SelectedSpec | None = None
    # lexicographic iteration makes the tie-break "smallest (p, q, r, I1, I2)"
    for p, q, r, i1, i2 in itertools.product(
        lag_grid, lag_grid, lag_grid, FLAG_GRID, FLAG_GRID
    ):
        cols = grid.columns_for(p, q, r, i1, i2)
        ssr = grid.ssr(cols)
        k = _penalty_count(p, q, r, i1, i2, len(cols), penalty)
        crit = grid.n * math.log(ssr / grid.n) + weight * k
        if best is None or crit < best.criterion:
            best = SelectedSpec(p, q, r, i1, i2, crit)
    assert best is not None
    return best


def aic_select(
    panel: PanelDataset,
    shocks: Mapping[str, ShockSeries],
    outcome: str,
    horizon: int,
    penalty: str = PENALTY_PAPER,
    lag_grid: tuple[int, ...] = LAG_GRID,
) -> SelectedSpec:
    """Minimise n ln(SSR/n) + 2k over the lag/trend grid."""
    return _select(panel, shocks, outcome, horizon, "aic", penalty, lag_grid)


def bic_select(
    panel: PanelDataset,
    shocks: Mapping[str, ShockSeries],
    outcome: str,
    horizon: int,
    penalty: str = PENALTY_PAPER,
    lag_grid: tuple[int, ...] = LAG_GRID,
) -> SelectedSpec:
    """Minimise n ln(SSR/n) + ln(n) k over the lag/trend grid."""
    return _select(panel, shocks, outcome, horizon, "bic", penalty, lag_grid)


def select_all_horizons(
    panel: PanelDataset,
    shocks: Mapping[str, ShockSeries],
    outcome: str,
    horizons: int,
    criterion: str = "aic",
    penalty: str = PENALTY_PAPER,
    lag_grid: tuple[int, ...] = LAG_GRID,
) -> SelectionResult:
    chooser = {"aic": aic_select, "bic": bic_select}.get(criterion)
    if chooser is None:
        raise ConfigError(f"unknown criterion {criterion!r}")
    by_horizon = {
        h: chooser(panel, shocks, outcome, h, penalty=penalty, lag_grid=lag_grid)
        for h in range(horizons + 1)
    }
    return SelectionResult(outcome=outcome, criterion=criterion, by_horizon=by_horizon)


def selection_table(result: SelectionResult) -> pd.DataFrame:
    """Appendix-style layout: rows q, p, r, T; one column per horizon."""
    horizons = sorted(result.by_horizon)
    data = {
        str(h): [
            result.by_horizon[h].q,
            result.by_horizon[h].p,
            result.by_horizon[h].r,
            result.by_horizon[h].trend_label,
        ]
        for h in horizons
    }
    return pd.DataFrame(data, index=["q", "p", "r", "T"])
