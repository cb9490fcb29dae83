"""Local-projection impulse responses to identified monetary-policy shocks."""

from .design import Design, LagOrder, LpSpec, TrendSpec, build_design
from .dgp import (
    OracleIrf,
    SimulatedPanel,
    StructuralModel,
    analytic_linear_irf,
    build_model,
    simulate,
    true_irf_oracle,
    validate_model,
)
from .errors import ConfigError, DataError, NumericalError, PanelirfError
from .estimation import FitResult, fit_projection, hc3_cluster_cov, ols_fit
from .factors import (
    DEFAULT_RESTRICTIONS,
    FactorModel,
    IdentificationResult,
    SignRestrictionMatrix,
    SurprisePanel,
    check_sign_restrictions,
    estimate_factor_mle,
    identify_factors,
    sample_orthonormal,
)
from .inference import (
    Restriction,
    WaldResult,
    build_restriction,
    significance_band,
    significance_table,
    wald_test,
)
from .nonlinear import (
    IrfCurve,
    PlugInEstimate,
    ShockTransform,
    ar1_check,
    conditional_irfs,
    estimate_A,
    scaled_irf_family,
    threshold_from_quantile,
    transform_eval,
    unconditional_irf,
)
from .panel import (
    CalendarMonth,
    CountrySeries,
    PanelDataset,
    ShockSeries,
    assign_shocks_to_months,
    deseasonalize_monthly,
    load_panel,
    to_log_points,
)
from .pipeline import PipelineConfig, load_config
from .selection import SelectionResult, aic_select, bic_select
from .symmetry import cm_test, mgg_test, mira_test, sample_stats

__version__ = "0.1.0"
