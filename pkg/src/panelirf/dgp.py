"""Block-recursive structural simulator and ground-truth impulse responses.

The simulated system stacks w_t = (x_t, y_t, z_t): three exogenous shocks,
country outcomes and common controls.  Shocks feed outcomes and controls
contemporaneously and through lags, both linearly and through a non-linear
transform; nothing feeds back into the shocks.  Ground-truth impulse
responses come from a brute-force paired-path oracle: two simulations share
every innovation draw, one has a single shock innovation perturbed, and the
outcome difference is averaged over paths (and hence over the shock
distribution).  For linear transmission a companion-matrix analytic curve
provides an independent cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .nonlinear import IDENTITY, ShockTransform, transform_eval
from .panel import (
    CalendarMonth,
    CountrySeries,
    EURO_CONTROLS,
    OUTCOME_VARIABLES,
    PanelDataset,
    SHOCK_KINDS,
    ShockSeries,
)

N_X = 3
_STATIONARITY_MARGIN = 1e-9
_ORACLE_CHUNK = 10_000


@dataclass
class StructuralModel:
    """Full coefficient matrices of the structural system.

    ``a_lags`` has shape (L, n, n) with index l meaning lag l+1; ``c_lags``
    has shape (Lc, n, 3) with index l meaning lag l (the transform enters
    contemporaneously).  The transform applies elementwise to the shock
    vector at every lag.
    """

    n_y: int
    n_z: int
    intercept: np.ndarray
    a0: np.ndarray
    a_lags: np.ndarray
    c_lags: np.ndarray
    transform: ShockTransform
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return N_X + self.n_y + self.n_z

    @property
    def y_slice(self) -> slice:
        return slice(N_X, N_X + self.n_y)

    @property
    def z_slice(self) -> slice:
        return slice(N_X + self.n_y, self.n)

    @property
    def max_lag(self) -> int:
        return max(self.a_lags.shape[0], max(self.c_lags.shape[0] - 1, 0), 1)


def _zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=float)


def build_model(
    n_y: int,
    n_z: int,
    a0_y_x=None,
    a0_y_z=None,
    a0_z_x=None,
    a0_z_y=None,
    lags_y_x=(),
    lags_y_y=(),
    lags_y_z=(),
    lags_z_x=(),
    lags_z_z=(),
    impact_y=(),
    impact_z=(),
    sigma_yy=None,
    sigma_yz=None,
    sigma_zz=None,
    intercept=None,
    transform: ShockTransform = ShockTransform(IDENTITY),
) -> StructuralModel:
    """Assemble a model from named blocks; omitted blocks are zero.

    Lag blocks are sequences of matrices indexed by lag (starting at 1);
    ``impact_y``/``impact_z`` are the transform-loading sequences indexed
    from lag 0.  The structural zero pattern is satisfied by construction.
    """
    n = N_X + n_y + n_z
    ys, zs = slice(N_X, N_X + n_y), slice(N_X + n_y, n)

    a0 = np.eye(n)
    if a0_y_x is not None:
        a0[ys, :N_X] = -np.asarray(a0_y_x, dtype=float)
    if a0_y_z is not None:
        a0[ys, zs] = -np.asarray(a0_y_z, dtype=float)
    if a0_z_x is not None:
        a0[zs, :N_X] = -np.asarray(a0_z_x, dtype=float)
    if a0_z_y is not None:
        a0[zs, ys] = -np.asarray(a0_z_y, dtype=float)

    def stack(blocks, rows, cols):
        return [np.asarray(b, dtype=float).reshape(rows, cols) for b in blocks]

    l_a = max(len(lags_y_x), len(lags_y_y), len(lags_y_z), len(lags_z_x), len(lags_z_z), 1)
    a_lags = _zeros((l_a, n, n))
    for l, b in enumerate(stack(lags_y_x, n_y, N_X)):
        a_lags[l, ys, :N_X] = b
    for l, b in enumerate(stack(lags_y_y, n_y, n_y)):
        a_lags[l, ys, ys] = b
    for l, b in enumerate(stack(lags_y_z, n_y, n_z)):
        a_lags[l, ys, zs] = b
    for l, b in enumerate(stack(lags_z_x, n_z, N_X)):
        a_lags[l, zs, :N_X] = b
    for l, b in enumerate(stack(lags_z_z, n_z, n_z)):
        a_lags[l, zs, zs] = b

    l_c = max(len(impact_y), len(impact_z), 1)
    c_lags = _zeros((l_c, n, N_X))
    for l, b in enumerate(stack(impact_y, n_y, N_X)):
        c_lags[l, ys, :] = b
    for l, b in enumerate(stack(impact_z, n_z, N_X)):
        c_lags[l, zs, :] = b

    sigma = np.eye(n)
    if sigma_yy is not None:
        sigma[ys, ys] = np.asarray(sigma_yy, dtype=float)
    if sigma_zz is not None:
        sigma[zs, zs] = np.asarray(sigma_zz, dtype=float)
    if sigma_yz is not None:
        syz = np.asarray(sigma_yz, dtype=float).reshape(n_y, n_z)
        sigma[ys, zs] = syz
        sigma[zs, ys] = syz.T

    a = _zeros(n) if intercept is None else np.asarray(intercept, dtype=float).reshape(n)
    return StructuralModel(
        n_y=n_y,
        n_z=n_z,
        intercept=a,
        a0=a0,
        a_lags=a_lags,
        c_lags=c_lags,
        transform=transform,
        sigma=sigma,
    )


def _companion(b_lags: np.ndarray) -> np.ndarray:
    l, n, _ = b_lags.shape
    m = _zeros((n * l, n * l))
    m[:n, :] = np.concatenate(list(b_lags), axis=1)
    if l > 1:
        m[n:, : n * (l - 1)] = np.eye(n * (l - 1))
    return m


def validate_model(model: StructuralModel) -> list[str]:
    """Check every structural constraint; returns violations, repairs nothing."""
    v: list[str] = []
    n, ys, zs = model.n, model.y_slice, model.z_slice
    a0 = model.a0
    if a0.shape != (n, n):
        return [f"A0 has shape {a0.shape}, expected {(n, n)}"]
    for name, sl in (("shock", slice(0, N_X)), ("outcome", ys), ("control", zs)):
        if not np.array_equal(a0[sl, sl], np.eye(sl.stop - sl.start)):
            v.append(f"A0 {name} diagonal block must be identity")
    if np.any(a0[:N_X, N_X:] != 0.0):
        v.append("A0 upper-right must be zero (shocks are exogenous)")
    if np.any(model.a_lags[:, :N_X, :] != 0.0):
        v.append("first row of lag blocks must be zero (shocks are exogenous)")
    if np.any(model.a_lags[:, zs, ys] != 0.0):
        v.append("control equations must not lag outcomes (A32 = 0)")
    if np.any(model.c_lags[:, :N_X, :] != 0.0):
        v.append("transform loadings on the shock equations must be zero")
    if abs(np.linalg.det(a0)) < 1e-12:
        v.append("A0 is singular")
        return v
    sig = model.sigma
    if not np.allclose(sig, sig.T, atol=1e-12):
        v.append("innovation covariance is not symmetric")
    if not np.array_equal(sig[:N_X, :N_X], np.eye(N_X)):
        v.append("shock innovations must have identity covariance")
    if np.any(sig[:N_X, N_X:] != 0.0) or np.any(sig[N_X:, :N_X] != 0.0):
        v.append("shock innovations must be uncorrelated with the others")
    if np.min(np.linalg.eigvalsh((sig + sig.T) / 2.0)) < -1e-10:
        v.append("innovation covariance is not positive semi-definite")
    b_lags = np.linalg.solve(a0, model.a_lags.reshape(-1, n).T).T.reshape(model.a_lags.shape)
    radius = np.max(np.abs(np.linalg.eigvals(_companion(b_lags))))
    if radius >= 1.0 - _STATIONARITY_MARGIN:
        v.append(f"companion spectral radius {radius:.6f} is not below 1")
    return v


def _require_valid(model: StructuralModel) -> None:
    violations = validate_model(model)
    if violations:
        raise DataError("invalid structural model: " + "; ".join(violations))


def _innovation_factor(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        evals, evecs = np.linalg.eigh((sigma + sigma.T) / 2.0)
        return evecs * np.sqrt(np.clip(evals, 0.0, None))


def _iterate(
    model: StructuralModel, eta: np.ndarray, a0_inv: np.ndarray
) -> np.ndarray:
    """Run the recursion for pre-drawn innovations of shape (steps, B, n)."""
    steps, batch, n = eta.shape
    max_lag = model.max_lag
    la = model.a_lags.shape[0]
    lc = model.c_lags.shape[0]
    w = _zeros((steps + max_lag, batch, n))
    fx = _zeros((steps + max_lag, batch, N_X))
    a = model.intercept
    for t in range(steps):
        s = t + max_lag
        rhs = a + eta[t]
        for l in range(la):
            rhs = rhs + w[s - 1 - l] @ model.a_lags[l].T
        for l in range(1, lc):
            rhs = rhs + fx[s - l] @ model.c_lags[l].T
        x_now = rhs[:, :N_X]
        fx[s] = transform_eval(model.transform, x_now)
        rhs = rhs + fx[s] @ model.c_lags[0].T
        w[s] = rhs @ a0_inv.T
    return w[max_lag:]


@dataclass
class SimulatedPanel:
    """Simulated draws: shocks and controls common to every country."""

    x: np.ndarray  # T x 3
    y: np.ndarray  # n_countries x T x n_y
    z: np.ndarray  # T x n_z
    model: StructuralModel
    seed: int
    burn_in: int

    @property
    def periods(self) -> int:
        return self.x.shape[0]

    def start_month(self) -> CalendarMonth:
        return CalendarMonth(2000, 1)

    def to_shock_series(self) -> dict[str, ShockSeries]:
        start = self.start_month()
        filled = np.zeros(self.periods, dtype=bool)
        return {
            kind: ShockSeries(kind, start, self.x[:, i], filled)
            for i, kind in enumerate(SHOCK_KINDS)
        }

    def to_panel_dataset(self) -> PanelDataset:
        """Map simulated blocks onto the panel vocabulary and schema."""
        if self.model.n_y > len(OUTCOME_VARIABLES):
            raise DataError("too many simulated outcomes for the variable vocabulary")
        if self.model.n_z > len(EURO_CONTROLS):
            raise DataError("too many simulated controls for the control vocabulary")
        start = self.start_month()
        outcome_names = OUTCOME_VARIABLES[: self.model.n_y]
        control_names = EURO_CONTROLS[: self.model.n_z]
        countries = {}
        for j in range(self.y.shape[0]):
            name = f"C{j + 1}"
            countries[name] = {
                var: CountrySeries(name, var, start, self.y[j, :, i])
                for i, var in enumerate(outcome_names)
            }
        controls = {
            var: CountrySeries("EA", var, start, self.z[:, i])
            for i, var in enumerate(control_names)
        }
        end = start.shift(self.periods - 1)
        return PanelDataset(countries, controls, tuple(outcome_names), (start, end))


def simulate(
    model: StructuralModel,
    periods: int,
    n_countries: int = 1,
    seed: int = 0,
    burn_in: int = 500,
) -> SimulatedPanel:
    """Simulate the validated model; countries share x and z draws.

    Countries replicate the outcome block with independent outcome
    innovations.  With more than one country the control equations must be
    autonomous from outcomes (contemporaneously and in the innovation
    covariance), otherwise controls could not be common.
    """
    _require_valid(model)
    n, ys, zs = model.n, model.y_slice, model.z_slice
    if n_countries < 1:
        raise ConfigError("n_countries must be at least 1")
    if n_countries > 1:
        if np.any(model.a0[zs, ys] != 0.0):
            raise DataError(
                "multi-country simulation needs control equations free of "
                "contemporaneous outcomes (A0 z-y block = 0)"
            )
        if np.any(model.sigma[ys, zs] != 0.0):
            raise DataError(
                "multi-country simulation needs uncorrelated outcome and "
                "control innovations (sigma_yz = 0)"
            )
    steps = periods + burn_in
    rng = np.random.default_rng(seed)

    u = rng.standard_normal((steps, N_X))
    if n_countries > 1:
        eps = rng.standard_normal((steps, n_countries, model.n_y))
        eps = eps @ _innovation_factor(model.sigma[ys, ys]).T
        vz = rng.standard_normal((steps, model.n_z))
        vz = vz @ _innovation_factor(model.sigma[zs, zs]).T
        eta = _zeros((steps, n_countries, n))
        eta[:, :, :N_X] = u[:, None, :]
        eta[:, :, ys] = eps
        eta[:, :, zs] = vz[:, None, :]
    else:
        tail = rng.standard_normal((steps, model.n_y + model.n_z))
        tail = tail @ _innovation_factor(model.sigma[N_X:, N_X:]).T
        eta = np.concatenate([u, tail], axis=1)[:, None, :]

    a0_inv = np.linalg.inv(model.a0)
    w = _iterate(model, eta, a0_inv)[burn_in:]
    x = w[:, 0, :N_X]
    z = w[:, 0, zs]
    y = np.transpose(w[:, :, ys], (1, 0, 2))
    return SimulatedPanel(x=x, y=y, z=z, model=model, seed=seed, burn_in=burn_in)


@dataclass
class OracleIrf:
    """Paired-path oracle estimate with Monte-Carlo standard errors."""

    shock_index: int
    delta: float
    values: np.ndarray  # (H+1) x n_y
    se: np.ndarray
    n_paths: int
    seed: int

    def curve(self, outcome: int = 0) -> np.ndarray:
        return self.values[:, outcome]


def true_irf_oracle(
    model: StructuralModel,
    shock_index: int,
    delta: float,
    horizon: int,
    n_paths: int = 20_000,
    seed: int = 0,
) -> OracleIrf:
    """Average paired-path outcome difference after a one-off shock bump.

    Both paths of a pair share every innovation draw; the perturbed path
    adds ``delta`` to shock ``shock_index`` at one date.  Because the paths
    are otherwise identical, all other noise cancels exactly and the mean
    difference estimates the unconditional impulse response, averaged over
    the shock distribution.  Paths are simulated in fixed-size blocks with
    counter-based seeding, so the result is reproducible and independent
    of any parallel split.
    """
    _require_valid(model)
    if delta == 0.0:
        zero = _zeros((horizon + 1, model.n_y))
        return OracleIrf(shock_index, 0.0, zero, zero.copy(), n_paths, seed)
    if not 0 <= shock_index < N_X:
        raise ConfigError(f"shock index must be in 0..{N_X - 1}")
    n = model.n
    max_lag = model.max_lag
    steps = max_lag + horizon + 1
    t0 = max_lag
    a0_inv = np.linalg.inv(model.a0)
    chol = _innovation_factor(model.sigma)

    total = 0
    acc = _zeros((horizon + 1, model.n_y))
    acc_sq = _zeros((horizon + 1, model.n_y))
    chunk_index = 0
    while total < n_paths:
        m = min(_ORACLE_CHUNK, n_paths - total)
        g = np.random.Generator(np.random.Philox(key=[seed, chunk_index]))
        eta = g.standard_normal((steps, m, n)) @ chol.T
        eta_shocked = eta.copy()
        eta_shocked[t0, :, shock_index] += delta
        base = _iterate(model, eta, a0_inv)
        bumped = _iterate(model, eta_shocked, a0_inv)
        diff = (bumped - base)[t0:, :, model.y_slice]  # (H+1, m, n_y)
        acc += diff.sum(axis=1)
        acc_sq += (diff**2).sum(axis=1)
        total += m
        chunk_index += 1

    mean = acc / total
    var = np.maximum(acc_sq / total - mean**2, 0.0)
    se = np.sqrt(var / total)
    return OracleIrf(shock_index, delta, mean, se, total, seed)


def analytic_linear_irf(
    model: StructuralModel, shock_index: int, delta: float, horizon: int
) -> np.ndarray:
    """Companion-matrix impulse response; defined for identity transform only.

    Serves as the independent closed-form cross-check of the paired-path
    oracle on linear models.
    """
    if model.transform.kind != IDENTITY:
        raise DataError("analytic IRF requires the identity transform")
    _require_valid(model)
    n = model.n
    la = model.a_lags.shape[0]
    lc = model.c_lags.shape[0]
    l_max = max(la, lc - 1, 1)
    b_lags = _zeros((l_max, n, n))
    a0_inv = np.linalg.inv(model.a0)
    for l in range(l_max):
        block = _zeros((n, n))
        if l < la:
            block += model.a_lags[l]
        if l + 1 < lc:
            block[:, :N_X] += model.c_lags[l + 1]
        b_lags[l] = a0_inv @ block
    impulse = _zeros(n)
    impulse[shock_index] = delta
    impulse[:] += model.c_lags[0][:, shock_index] * delta
    v0 = a0_inv @ impulse

    comp = _companion(b_lags)
    state = _zeros(n * l_max)
    state[:n] = v0
    out = _zeros((horizon + 1, model.n_y))
    out[0] = v0[model.y_slice]
    for h in range(1, horizon + 1):
        state = comp @ state
        out[h] = state[:n][model.y_slice]
    return out


# ---------------------------------------------------------------------------
# model specification files
# ---------------------------------------------------------------------------


def model_from_dict(doc: dict) -> StructuralModel:
    try:
        n_y = int(doc["n_y"])
        n_z = int(doc["n_z"])
    except KeyError as exc:
        raise ConfigError(f"model spec is missing {exc}") from exc
    a0 = doc.get("a0", {})
    lags = doc.get("lags", {})
    impact = doc.get("impact", {})
    sigma = doc.get("sigma", {})
    tr = doc.get("transform", {"kind": IDENTITY})
    transform = ShockTransform(tr.get("kind", IDENTITY), float(tr.get("b", 0.0)))
    return build_model(
        n_y,
        n_z,
        a0_y_x=a0.get("y_x"),
        a0_y_z=a0.get("y_z"),
        a0_z_x=a0.get("z_x"),
        a0_z_y=a0.get("z_y"),
        lags_y_x=lags.get("y_x", ()),
        lags_y_y=lags.get("y_y", ()),
        lags_y_z=lags.get("y_z", ()),
        lags_z_x=lags.get("z_x", ()),
        lags_z_z=lags.get("z_z", ()),
        impact_y=impact.get("y", ()),
        impact_z=impact.get("z", ()),
        sigma_yy=sigma.get("yy"),
        sigma_yz=sigma.get("yz"),
        sigma_zz=sigma.get("zz"),
        intercept=doc.get("intercept"),
        transform=transform,
    )


def read_model_spec(path) -> tuple[StructuralModel, dict]:
    """Load a model spec document; returns (model, full document)."""
    with open(path) as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc
