"""Linear restrictions and Wald tests on fitted projection coefficients.

Each hypothesis is a single linear restriction over the named coefficient
layout whose leading entries are the contemporaneous shock coefficients
followed by the contemporaneous transformed-shock coefficients.  The Wald
statistic (R b)^2 / (R Omega R') is referred to chi-squared with one degree
of freedom; p-values feed a three-way significance banding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .design import fx_column, shock_column
from .errors import DataError, NumericalError

GAMMA_ONLY = "gamma_only"
PLUGIN_IRF = "plugin_irf"
CONDITIONAL_POS = "conditional_pos"
CONDITIONAL_NEG = "conditional_neg"

BAND_NONE = "none"
BAND_WEAK = "weak"
BAND_STRONG = "strong"


@dataclass(frozen=True)
class Restriction:
    """A single restriction row over a named coefficient layout."""

    vector: np.ndarray
    label: str

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if not np.any(v):
            raise DataError("restriction vector is identically zero")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)


def build_restriction(
    kind: str,
    shock: str,
    column_names: Sequence[str],
    delta: float | None = None,
    a_hat: float | None = None,
) -> Restriction:
    """Restriction vector for one hypothesis family and one shock.

    gamma_only tests the transformed-shock coefficient alone; plugin_irf
    weights the (psi, gamma) pair by (delta, A_hat); conditional_pos and
    conditional_neg test gamma + psi and gamma - psi respectively.
    """
    names = list(column_names)
    vec = np.zeros(len(names))

    def locate(name: str) -> int:
        try:
            return names.index(name)
        except ValueError as exc:
            raise DataError(f"coefficient {name!r} not present in layout") from exc

    psi_idx = locate(shock_column(shock, 0))
    if kind == GAMMA_ONLY:
        vec[locate(fx_column(shock, 0))] = 1.0
    elif kind == PLUGIN_IRF:
        if delta is None or a_hat is None:
            raise DataError("plugin_irf restrictions need delta and a_hat")
        vec[psi_idx] = delta
        vec[locate(fx_column(shock, 0))] = a_hat
    elif kind == CONDITIONAL_POS:
        vec[psi_idx] = 1.0
        vec[locate(fx_column(shock, 0))] = 1.0
    elif kind == CONDITIONAL_NEG:
        vec[psi_idx] = -1.0
        vec[locate(fx_column(shock, 0))] = 1.0
    else:
        raise DataError(f"unknown restriction kind {kind!r}")
    return Restriction(vec, f"{kind}:{shock}")


def chi2_sf_1df(w: float) -> float:
    """Upper tail of chi-squared(1) via the complementary error function."""
    if w < 0:
        raise NumericalError(f"negative Wald statistic {w}")
    return math.erfc(math.sqrt(w / 2.0))


@dataclass(frozen=True)
class WaldResult:
    w: float
    df: int
    p_value: float


def wald_test(
    restriction: Restriction | np.ndarray, beta: np.ndarray, omega: np.ndarray
) -> WaldResult:
    """Single-restriction Wald test: W = (R b)^2 / (R Omega R')."""
    r = restriction.vector if isinstance(restriction, Restriction) else np.asarray(restriction, float)
    variance = float(r @ omega @ r)
    if variance <= 1e-14:
        raise NumericalError("degenerate restriction variance in Wald test")
    rb = float(r @ beta)
    w = rb * rb / variance
    return WaldResult(w=w, df=1, p_value=chi2_sf_1df(w))


def significance_band(p: float) -> str:
    """none for p > 0.1, weak for 0.05 < p <= 0.1, strong for p <= 0.05."""
    if not 0.0 <= p <= 1.0:
        raise DataError(f"p-value out of range: {p}")
    if p > 0.1:
        return BAND_NONE
    if p > 0.05:
        return BAND_WEAK
    return BAND_STRONG


def significance_table(
    results: Mapping[tuple[str, str, int], WaldResult],
    outcomes: Sequence[str],
    shocks: Sequence[str],
    horizons: Sequence[int],
) -> pd.DataFrame:
    """Banded table over the full (outcome, shock, horizon) grid.

    Missing cells are an error naming the coordinates.  The CSV long form
    is ``outcome,shock,h,W,p,band``; the figure renderer lays cells out as
    one row per (outcome, shock) pair and one column per horizon.
    """
    records = []
    for outcome in outcomes:
        for shock in shocks:
            for h in horizons:
                key = (outcome, shock, h)
                if key not in results:
                    raise DataError(f"missing Wald cell for {key}")
                res = results[key]
                records.append(
                    {
                        "outcome": outcome,
                        "shock": shock,
                        "h": h,
                        "W": res.w,
                        "p": res.p_value,
                        "band": significance_band(res.p_value),
                    }
                )
    return pd.DataFrame.from_records(records)
