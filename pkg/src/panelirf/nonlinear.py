"""Shock transforms and the plug-in non-linear impulse-response machinery.

The sign specification augments the projection with the even transform
|x|; the size specification uses the odd dead-zone transform that vanishes
on [-b, b] and shifts the tails toward zero by b.  The plug-in estimator
turns a fitted (psi, gamma) pair into an unconditional impulse response by
averaging f(x + delta) - f(x) over the shock distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .panel import ShockSeries

IDENTITY = "identity"
ABS_VALUE = "abs_value"
THRESHOLD_SHIFT = "threshold_shift"

DEFAULT_SCALE_GRID = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass(frozen=True)
class ShockTransform:
    """identity, |x|, or the odd dead-zone transform with threshold ``b``."""

    kind: str
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in (IDENTITY, ABS_VALUE, THRESHOLD_SHIFT):
            raise DataError(f"unknown transform kind {self.kind!r}")
        if self.b < 0:
            raise DataError(f"threshold must be non-negative, got {self.b}")


def transform_eval(t: ShockTransform, x):
    """Evaluate the transform pointwise; accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    if t.kind == IDENTITY:
        out = x.copy()
    elif t.kind == ABS_VALUE:
        out = np.abs(x)
    else:
        out = np.where(x <= -t.b, x + t.b, 0.0) + np.where(x >= t.b, x - t.b, 0.0)
    return out if out.ndim else float(out)


def inclusive_quantile(values: np.ndarray, q: float) -> float:
    """Inclusive (ceiling-index) empirical quantile of ``values``."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise DataError("quantile of an empty sample")
    idx = max(int(math.ceil(q * v.size)) - 1, 0)
    return float(v[idx])


def threshold_from_quantile(shocks: ShockSeries, coverage: float = 0.6) -> float:
    """Dead-zone threshold b with P(|x| <= b) ~ coverage over event months."""
    if not 0.0 < coverage < 1.0:
        raise DataError(f"coverage must lie in (0, 1), got {coverage}")
    x = shocks.conference_values()
    if x.size == 0:
        raise DataError(f"shock {shocks.kind} has no event months")
    return inclusive_quantile(np.abs(x), coverage)


@dataclass(frozen=True)
class PlugInEstimate:
    """Average transform response to a shift of size ``delta``."""

    delta: float
    a_hat: float


def estimate_A(
    shocks: ShockSeries | np.ndarray,
    delta: float,
    t: ShockTransform,
    conference_only: bool = False,
) -> PlugInEstimate:
    """Sample mean of f(x + delta) - f(x).

    By default the mean runs over all months of the regression sample,
    zero-filled months included, because those zeros are part of the
    regressor; ``conference_only`` restricts to event months for
    sensitivity analysis.
    """
    if isinstance(shocks, ShockSeries):
        x = shocks.conference_values() if conference_only else shocks.values
    else:
        x = np.asarray(shocks, dtype=float)
    if x.size == 0:
        raise DataError("plug-in average over an empty shock sample")
    a_hat = float(np.mean(transform_eval(t, x + delta) - transform_eval(t, x)))
    return PlugInEstimate(delta=delta, a_hat=a_hat)


@dataclass(frozen=True)
class IrfCurve:
    """Per-horizon impulse-response values with provenance labels."""

    shock: str
    outcome: str
    spec_label: str  # linear | sign | size
    flavor: str  # unconditional | conditional_pos | conditional_neg | scaled(a)
    values: np.ndarray
    delta: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(len(self.values))


def unconditional_irf(
    psi: np.ndarray,
    gamma: np.ndarray | None,
    delta: float,
    a_hat: float,
    shock: str = "",
    outcome: str = "",
    spec_label: str = "linear",
) -> IrfCurve:
    """Plug-in unconditional IRF: value(h) = psi_h * delta + gamma_h * a_hat.

    With ``gamma`` absent (or zero) this reduces to the linear IRF
    psi_h * delta.
    """
    psi = np.asarray(psi, dtype=float)
    values = psi * delta
    if gamma is not None:
        values = values + np.asarray(gamma, dtype=float) * a_hat
    return IrfCurve(shock, outcome, spec_label, "unconditional", values, delta)


def conditional_irfs(
    psi: np.ndarray,
    gamma: np.ndarray,
    shock: str = "",
    outcome: str = "",
    spec_label: str = "sign",
    negate_negative: bool = False,
) -> tuple[IrfCurve, IrfCurve]:
    """Sign-specification conditional IRFs: (gamma + psi, gamma - psi).

    ``negate_negative`` flips the sign of the negative branch for display,
    so both branches read as responses to a unit-magnitude disturbance.
    """
    if spec_label != "sign":
        raise DataError("conditional IRFs are defined for the sign specification only")
    psi = np.asarray(psi, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    pos = IrfCurve(shock, outcome, spec_label, "conditional_pos", gamma + psi, 1.0)
    neg_vals = gamma - psi
    if negate_negative:
        neg_vals = -neg_vals
    neg = IrfCurve(shock, outcome, spec_label, "conditional_neg", neg_vals, -1.0)
    return pos, neg


def scaled_irf_family(
    psi: np.ndarray,
    gamma: np.ndarray,
    shocks: ShockSeries | np.ndarray,
    transform: ShockTransform,
    sigma: float,
    a_set: tuple[float, ...] = DEFAULT_SCALE_GRID,
    shock: str = "",
    outcome: str = "",
    simplified: bool = False,
    conference_only: bool = False,
) -> list[IrfCurve]:
    """Per-unit IRFs at shock sizes a * sigma for each a in ``a_set``.

    The default follows the printed construction (1/a) * (psi * a * sigma
    + A_hat(a sigma) * a * gamma), keeping the outer 1/a and both inner
    factors of a.  ``simplified`` drops the inner a on the gamma term,
    i.e. the plain per-unit plug-in IRF (psi * delta + gamma * A_hat) / a
    at delta = a * sigma.
    """
    if transform.kind != THRESHOLD_SHIFT:
        raise DataError("scaled IRF families are defined for the size specification")
    psi = np.asarray(psi, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    curves = []
    for a in a_set:
        if a <= 0:
            raise DataError(f"scale factors must be positive, got {a}")
        a_hat = estimate_A(shocks, a * sigma, transform, conference_only).a_hat
        if simplified:
            values = (psi * a * sigma + a_hat * gamma) / a
        else:
            values = (psi * a * sigma + a_hat * a * gamma) / a
        curves.append(
            IrfCurve(shock, outcome, "size", f"scaled({a:g})", values, a * sigma)
        )
    return curves


def ar1_check(values: np.ndarray) -> dict:
    """First-order autoregression slope with an HC3 standard error.

    The regression has no intercept (identified shocks are centered), so a
    perfectly persistent series gives a slope of exactly 1.  Used as a
    guardrail: the plug-in construction assumes serially uncorrelated
    shocks.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 20:
        raise DataError(f"AR(1) check needs at least 20 observations, got {x.size}")
    y, lag = x[1:], x[:-1]
    sxx = float(lag @ lag)
    if sxx == 0.0:
        raise DataError("AR(1) check on an all-zero series")
    coef = float(lag @ y) / sxx
    resid = y - coef * lag
    lev = lag**2 / sxx
    adj = resid / np.maximum(1.0 - lev, 1e-12)
    se = float(np.sqrt(np.sum((lag * adj) ** 2)) / sxx)
    if se == 0.0:
        p = 0.0 if coef != 0 else 1.0
    else:
        p = float(math.erfc(abs(coef / se) / math.sqrt(2.0)))
    return {"coefficient": coef, "stderr": se, "p_value": p}
