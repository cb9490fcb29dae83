"""Static factor model of high-frequency surprises with sign-restricted rotation.

An 8-instrument surprise panel is fitted by Gaussian maximum likelihood with
a diagonal specific covariance (EM).  Orthonormal rotations are sampled from
the Haar measure on O(3); rotations whose rotated loadings satisfy the sign
restrictions are collected, and the accepted rotation closest (Frobenius) to
the entrywise median of accepted rotated loadings identifies the factors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataError, NumericalError

INSTRUMENT_COLUMNS = (
    "ois1y",
    "ois2y",
    "ois5y",
    "ois10y",
    "it2y_spread",
    "it5y_spread",
    "it10y_spread",
    "stoxx50",
)

# Cell codes: "+" positive, "-" negative, "." unrestricted, "--" negative and
# dominant in absolute value within its row.
POS, NEG, ANY, NEG_DOMINANT = "+", "-", ".", "--"

_PSI_FLOOR = 1e-6


@dataclass(frozen=True)
class SignRestrictionMatrix:
    """Grid of sign constraints on the rotated loading matrix."""

    cells: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                if cell not in (POS, NEG, ANY, NEG_DOMINANT):
                    raise DataError(f"unknown sign-restriction code {cell!r}")
                if cell == NEG_DOMINANT and not (j == 2 and 4 <= i <= 6):
                    raise DataError(
                        "dominant-negative cells are only allowed in the third "
                        "column of the three spread rows"
                    )

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.cells[0])


DEFAULT_RESTRICTIONS = SignRestrictionMatrix(
    (
        (POS, POS, POS),  # ois1y
        (POS, POS, POS),  # ois2y
        (POS, POS, POS),  # ois5y
        (POS, ANY, POS),  # ois10y
        (POS, NEG, NEG_DOMINANT),  # it2y_spread
        (POS, NEG, NEG_DOMINANT),  # it5y_spread
        (POS, NEG, NEG_DOMINANT),  # it10y_spread
        (NEG, POS, POS),  # stoxx50
    )
)


@dataclass(frozen=True)
class SurprisePanel:
    """Event-dated surprises for the 8 instruments, in fixed column order."""

    dates: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(INSTRUMENT_COLUMNS):
            raise DataError(
                f"surprise panel must have {len(INSTRUMENT_COLUMNS)} columns"
            )
        if v.shape[0] != len(self.dates):
            raise DataError("surprise rows and dates are misaligned")
        if not np.isfinite(v).all():
            raise DataError("surprise panel contains missing or non-finite cells")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.dates)


def read_surprise_csv(path) -> SurprisePanel:
    df = pd.read_csv(path, dtype={"date": str}, float_precision="round_trip")
    missing = [c for c in ("date",) + INSTRUMENT_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"surprise CSV is missing columns {missing}")
    return SurprisePanel(
        tuple(df["date"]), df[list(INSTRUMENT_COLUMNS)].to_numpy(dtype=float)
    )


@dataclass
class FactorModel:
    """Gaussian factor MLE: loadings, specific variances and regression scores."""

    loadings: np.ndarray  # p x k
    specific_variances: np.ndarray  # p
    scores: np.ndarray  # T x k, regression (Thomson) method
    column_means: np.ndarray
    loglik: float
    n_iter: int
    converged: bool
    heywood: bool

    @property
    def implied_cov(self) -> np.ndarray:
        return self.loadings @ self.loadings.T + np.diag(self.specific_variances)


def _gaussian_loglik(S: np.ndarray, sigma: np.ndarray, n: int) -> float:
    p = S.shape[0]
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        return -np.inf
    return -0.5 * n * (p * np.log(2 * np.pi) + logdet + np.trace(np.linalg.solve(sigma, S)))


def estimate_factor_mle(
    surprises: SurprisePanel | np.ndarray,
    k: int = 3,
    max_iter: int = 2000,
    tol: float = 1e-9,
) -> FactorModel:
    """Fit the k-factor model by EM with diagonal specific covariance.

    Columns are demeaned internally.  The log-likelihood is non-decreasing
    across iterations; specific variances hitting zero (Heywood cases) are
    floored at 1e-6 and flagged.  Non-convergence raises a warning and
    returns the final iterate.
    """
    X = surprises.values if isinstance(surprises, SurprisePanel) else np.asarray(surprises, float)
    n, p = X.shape
    if n < 30:
        raise DataError(f"factor MLE needs at least 30 events, got {n}")
    means = X.mean(axis=0)
    Xc = X - means
    S = (Xc.T @ Xc) / n

    # principal-component start
    evals, evecs = np.linalg.eigh(S)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    lam = evecs[:, :k] * np.sqrt(np.maximum(evals[:k], _PSI_FLOOR))
    psi = np.maximum(np.diag(S) - np.sum(lam**2, axis=1), _PSI_FLOOR)

    heywood = False
    ll_old = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        sigma = lam @ lam.T + np.diag(psi)
        B = np.linalg.solve(sigma, lam).T  # k x p, equals lam' sigma^-1
        M = np.eye(k) - B @ lam + B @ S @ B.T  # E[ff'] second moment, symmetric
        lam = np.linalg.solve(M, B @ S).T
        psi = np.diag(S - lam @ B @ S).copy()
        low = psi < _PSI_FLOOR
        if low.any():
            heywood = True
            psi[low] = _PSI_FLOOR
        ll = _gaussian_loglik(S, lam @ lam.T + np.diag(psi), n)
        if abs(ll - ll_old) < tol * (1.0 + abs(ll)):
            converged = True
            ll_old = ll
            break
        ll_old = ll
    if not converged:
        warnings.warn(
            f"factor EM did not converge after {max_iter} iterations", RuntimeWarning
        )

    sigma = lam @ lam.T + np.diag(psi)
    B = np.linalg.solve(sigma, lam).T
    scores = Xc @ B.T
    return FactorModel(
        loadings=lam,
        specific_variances=psi,
        scores=scores,
        column_means=means,
        loglik=ll_old,
        n_iter=it,
        converged=converged,
        heywood=heywood,
    )


# ---------------------------------------------------------------------------
# rotation sampling and sign restrictions
# ---------------------------------------------------------------------------


def _fix_qr_signs(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    # make R's diagonal positive so Q is Haar distributed on O(k)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    return q * d[..., None, :]


def sample_orthonormal(rng: np.random.Generator, dim: int = 3) -> np.ndarray:
    """One Haar-distributed orthonormal matrix on O(dim)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return _fix_qr_signs(q, r)


def _rotation_batch(seed: int, start: int, count: int, dim: int = 3) -> np.ndarray:
    """Rotations for draw indices start..start+count-1.

    Each draw uses its own counter-based bit generator keyed by (seed, index),
    so a parallel evaluation over index blocks reproduces the sequential
    stream exactly.
    """
    normals = np.empty((count, dim, dim))
    for j in range(count):
        g = np.random.Generator(np.random.Philox(key=[seed, start + j]))
        normals[j] = g.standard_normal((dim, dim))
    q, r = np.linalg.qr(normals)
    return _fix_qr_signs(q, r)


def check_sign_restrictions(
    rotated: np.ndarray, restrictions: SignRestrictionMatrix = DEFAULT_RESTRICTIONS
) -> bool:
    """True iff every cell of ``rotated`` satisfies its constraint."""
    L = np.asarray(rotated, dtype=float)
    if L.shape != restrictions.shape:
        raise DataError(
            f"loading shape {L.shape} does not match restrictions {restrictions.shape}"
        )
    return bool(_check_batch(L[None], restrictions)[0])


def _check_batch(batch: np.ndarray, restrictions: SignRestrictionMatrix) -> np.ndarray:
    ok = np.ones(batch.shape[0], dtype=bool)
    for i, row in enumerate(restrictions.cells):
        for j, cell in enumerate(row):
            col = batch[:, i, j]
            if cell == POS:
                ok &= col > 0
            elif cell == NEG:
                ok &= col < 0
            elif cell == NEG_DOMINANT:
                others = np.abs(np.delete(batch[:, i, :], j, axis=1)).max(axis=1)
                ok &= (col < 0) & (np.abs(col) > others)
    return ok


@dataclass
class IdentificationResult:
    """Accepted rotation, identified loadings and standardized factor values."""

    rotation: np.ndarray  # Q*
    rotated_loadings: np.ndarray  # Lambda Q*
    factors: np.ndarray  # T x k, unit sample variance per column
    factor_scale: np.ndarray  # sd removed from each raw factor column
    accepted: int
    n_draws: int
    acceptance_rate: float
    seed: int


def identify_factors(
    model: FactorModel,
    restrictions: SignRestrictionMatrix = DEFAULT_RESTRICTIONS,
    n_draws: int = 100_000,
    seed: int = 0,
    extra_candidates: Sequence[np.ndarray] = (),
    batch: int = 8192,
) -> IdentificationResult:
    """Identify factors by accepted-rotation median matching.

    All accepted rotated loadings are collected; the accepted rotation whose
    loadings are Frobenius-closest to their entrywise median is selected,
    with ties broken by scan order (injected candidates first, then draw
    index).  Identified factors are Q*'f_t, standardized to unit sample
    variance.
    """
    lam = model.loadings
    k = lam.shape[1]
    accepted_q: list[np.ndarray] = []
    accepted_l: list[np.ndarray] = []

    def consume(qs: np.ndarray):
        rotated = np.einsum("pk,nkj->npj", lam, qs)
        ok = _check_batch(rotated, restrictions)
        for idx in np.nonzero(ok)[0]:
            accepted_q.append(qs[idx])
            accepted_l.append(rotated[idx])

    if extra_candidates:
        consume(np.asarray(list(extra_candidates), dtype=float))
    done = 0
    while done < n_draws:
        m = min(batch, n_draws - done)
        consume(_rotation_batch(seed, done, m, dim=k))
        done += m

    total = n_draws + len(extra_candidates)
    rate = len(accepted_q) / total if total else 0.0
    if not accepted_q:
        raise NumericalError(
            f"no rotation satisfied the sign restrictions in {total} draws "
            "(acceptance rate 0)"
        )
    if rate < 1e-3:
        warnings.warn(
            f"sign-restriction acceptance rate is low: {rate:.2e}", RuntimeWarning
        )

    stack = np.stack(accepted_l)
    median = np.median(stack, axis=0)
    dist = np.linalg.norm(stack - median, axis=(1, 2))
    best = int(np.argmin(dist))  # argmin keeps the first minimiser: scan order
    q_star = accepted_q[best]

    raw = model.scores @ q_star
    centered = raw - raw.mean(axis=0)
    scale = centered.std(axis=0, ddof=1)
    if np.any(scale <= 0):
        raise NumericalError("identified factor with zero variance")
    return IdentificationResult(
        rotation=q_star,
        rotated_loadings=lam @ q_star,
        factors=centered / scale,
        factor_scale=scale,
        accepted=len(accepted_q),
        n_draws=n_draws,
        acceptance_rate=rate,
        seed=seed,
    )
