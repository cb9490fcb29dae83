"""Distribution-symmetry diagnostics for identified shock series.

Three mean-minus-median statistics are computed: studentized by the sample
standard deviation (CM), by the mean absolute deviation from the median
scaled by sqrt(pi/2) (M1), and by a bootstrap standard error of
2 * (mean - median) (M2).  P-values come from a symmetrization bootstrap:
the sample is centered at its median, reflected, and resampled; two-sided
p-values count replicate statistics at least as extreme as the observed
one.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .errors import DataError, NumericalError
from .nonlinear import inclusive_quantile
from .panel import ShockSeries

DEFAULT_BOOTSTRAP = 4999
DEFAULT_INNER = 200
_CHUNK = 500


def sample_stats(x: np.ndarray) -> dict:
    """Mean, sd (n-1), moment skewness and the inclusive 80th quantile."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise DataError(f"summary statistics need at least 3 observations, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    return {
        "mean": mean,
        "sd": sd,
        "skewness": skew,
        "q80": inclusive_quantile(x, 0.8),
    }


def _cm_stat(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    num = x.mean(axis=-1) - np.median(x, axis=-1)
    sd = x.std(axis=-1, ddof=1)
    return np.sqrt(n) * num / sd


def _m1_stat(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    med = np.median(x, axis=-1)
    num = x.mean(axis=-1) - med
    j = math.sqrt(math.pi / 2.0) * np.mean(
        np.abs(x - med[..., None]), axis=-1
    )
    return np.sqrt(n) * num / j


def _m2_stat(x: np.ndarray, rng: np.random.Generator, inner: int) -> np.ndarray:
    """2 * (mean - median) studentized by a bootstrap standard error."""
    x = np.atleast_2d(x)
    b, n = x.shape
    gamma = 2.0 * (x.mean(axis=-1) - np.median(x, axis=-1))
    se = np.empty(b)
    for lo in range(0, b, _CHUNK):
        hi = min(lo + _CHUNK, b)
        idx = rng.integers(0, n, size=(hi - lo, inner, n))
        draws = np.take_along_axis(x[lo:hi, None, :], idx, axis=-1)
        reps = 2.0 * (draws.mean(axis=-1) - np.median(draws, axis=-1))
        se[lo:hi] = reps.std(axis=-1, ddof=1)
    # an exactly symmetric sample has gamma == 0; keep the statistic exact
    # even if the resampled spread degenerates
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(gamma == 0.0, 0.0, gamma / se)
    return out


def _symmetrized_pool(x: np.ndarray) -> np.ndarray:
    centered = x - np.median(x)
    return np.concatenate([centered, -centered])


def _bootstrap_p(
    observed: float, replicate_stats: np.ndarray, n_boot: int
) -> float:
    exceed = int(np.sum(np.abs(replicate_stats) >= abs(observed) - 1e-15))
    return (1 + exceed) / (n_boot + 1)


def _run_test(x: np.ndarray, stat: str, n_boot: int, seed: int, inner: int) -> dict:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 20:
        raise DataError(f"symmetry tests need at least 20 observations, got {n}")
    if x.std(ddof=1) <= 0:
        raise NumericalError("symmetry test on a zero-variance sample")
    rng = np.random.default_rng(seed)
    if stat == "cm":
        observed = float(_cm_stat(x[None])[0])
    elif stat == "m1":
        observed = float(_m1_stat(x[None])[0])
    else:
        observed = float(_m2_stat(x[None], rng, inner)[0])

    pool = _symmetrized_pool(x)
    idx = rng.integers(0, pool.size, size=(n_boot, n))
    draws = pool[idx]
    if stat == "cm":
        reps = _cm_stat(draws)
    elif stat == "m1":
        reps = _m1_stat(draws)
    else:
        reps = _m2_stat(draws, rng, inner)
    return {
        "stat": observed,
        "p": _bootstrap_p(observed, reps, n_boot),
        "n_boot": n_boot,
        "seed": seed,
    }


def cm_test(x: np.ndarray, n_boot: int = DEFAULT_BOOTSTRAP, seed: int = 0) -> dict:
    """Mean-minus-median test studentized by the sample standard deviation."""
    return _run_test(x, "cm", n_boot, seed, DEFAULT_INNER)


def mgg_test(x: np.ndarray, n_boot: int = DEFAULT_BOOTSTRAP, seed: int = 0) -> dict:
    """Mean-minus-median test studentized by the scaled mean absolute deviation."""
    return _run_test(x, "m1", n_boot, seed, DEFAULT_INNER)


def mira_test(
    x: np.ndarray,
    n_boot: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    inner: int = DEFAULT_INNER,
) -> dict:
    """2(mean - median) studentized by a resampling variance estimate."""
    return _run_test(x, "m2", n_boot, seed, inner)


def symmetry_report(
    shocks: Mapping[str, ShockSeries],
    n_boot: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> dict:
    """Summary statistics and all three tests per shock, over event months."""
    report: dict = {"n_boot": n_boot, "seed": seed, "shocks": {}}
    for kind, series in shocks.items():
        x = series.conference_values()
        entry = {"n": int(x.size)}
        entry.update(sample_stats(x))
        entry["cm"] = {k: v for k, v in cm_test(x, n_boot, seed).items() if k in ("stat", "p")}
        entry["m1"] = {k: v for k, v in mgg_test(x, n_boot, seed).items() if k in ("stat", "p")}
        entry["m2"] = {k: v for k, v in mira_test(x, n_boot, seed).items() if k in ("stat", "p")}
        report["shocks"][kind] = entry
    return report
