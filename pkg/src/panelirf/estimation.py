"""OLS with cluster-robust jackknife (HC3) covariance for local projections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .design import Design, LpSpec, build_design
from .errors import NumericalError
from .panel import PanelDataset, ShockSeries

_RANK_RTOL = 1e-10


def ols_fit(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Least-squares fit via pivoted QR; returns (beta, residuals, leverages).

    Raises :class:`NumericalError` on rank deficiency, naming the offending
    columns (by index) so callers can report collinear regressors.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n < k:
        raise NumericalError(f"design has more columns ({k}) than rows ({n})")
    Q, R, perm = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diagonal(R))
    cutoff = diag[0] * _RANK_RTOL * max(n, k) if diag.size else 0.0
    rank = int(np.sum(diag > cutoff))
    if rank < k:
        dropped = sorted(int(j) for j in perm[rank:])
        raise NumericalError(f"rank-deficient design; collinear columns {dropped}")
    beta_perm = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[perm] = beta_perm
    residuals = y - X @ beta
    leverages = np.sum(Q**2, axis=1)
    return beta, residuals, leverages


def hc3_cluster_cov(
    X: np.ndarray,
    residuals: np.ndarray,
    leverages: np.ndarray,
    cluster_ids: Sequence,
) -> np.ndarray:
    """Arellano sandwich with HC3-adjusted residuals u_i / (1 - h_ii).

    With every row its own cluster and zero leverages this reduces to the
    classical HC0 sandwich.  The result is exactly symmetric.
    """
    X = np.asarray(X, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    leverages = np.asarray(leverages, dtype=float)
    if np.any(leverages >= 1.0 - 1e-12):
        raise NumericalError("leverage of 1 encountered; HC3 adjustment undefined")
    adj = residuals / (1.0 - leverages)
    ids = np.asarray(cluster_ids)
    scores = X * adj[:, None]
    meat = np.zeros((X.shape[1], X.shape[1]))
    for c in np.unique(ids):
        s = scores[ids == c].sum(axis=0)
        meat += np.outer(s, s)
    bread = np.linalg.inv(X.T @ X)
    omega = bread @ meat @ bread
    return (omega + omega.T) / 2.0


@dataclass
class FitResult:
    """Coefficients, residual diagnostics and cluster-robust covariance."""

    beta: np.ndarray
    column_names: list[str]
    residuals: np.ndarray
    leverages: np.ndarray
    cov: np.ndarray
    n_obs: int
    n_params: int
    n_clusters: int

    def index_of(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError as exc:
            raise NumericalError(f"unknown coefficient {name!r}") from exc

    def coef(self, name: str) -> float:
        return float(self.beta[self.index_of(name)])

    def stderr(self, name: str) -> float:
        i = self.index_of(name)
        return float(np.sqrt(max(self.cov[i, i], 0.0)))

    def cov_block(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.index_of(n) for n in names]
        return self.cov[np.ix_(idx, idx)]

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)


def fit_design(design: Design) -> FitResult:
    beta, residuals, leverages = ols_fit(design.X, design.y)
    cov = hc3_cluster_cov(design.X, residuals, leverages, design.cluster_ids)
    return FitResult(
        beta=beta,
        column_names=list(design.column_names),
        residuals=residuals,
        leverages=leverages,
        cov=cov,
        n_obs=design.X.shape[0],
        n_params=design.X.shape[1],
        n_clusters=len(np.unique(design.cluster_ids)),
    )


def fit_projection(
    panel: PanelDataset,
    shocks: Mapping[str, ShockSeries],
    spec: LpSpec,
    cluster_by: str = "country",
) -> FitResult:
    """Build the design for ``spec`` and fit it."""
    return fit_design(build_design(panel, shocks, spec, cluster_by=cluster_by))
