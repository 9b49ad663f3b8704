"""Multivariate normality testing for gridded spatial data.

The heavy lifting lives in the compiled extension ``gridnorm._gridnorm``;
this package re-exports its public surface.
"""

from ._gridnorm import (  # noqa: F401
    BhResult,
    CurveBundle,
    FunctionalSummary,
    InputError,
    JbStarOutcome,
    NumericError,
    RejectionCurve,
    TestOutcome,
    UitReport,
    __version__,
    bessel_k,
    bh_procedure,
    chi2_sf,
    default_bandwidth,
    doornik_hansen,
    functional_summary,
    gamma_fn,
    jb_star,
    mardia_kurtosis,
    mardia_skewness,
    matern_corr,
    modified_band_depth,
    normal_sf,
    rho_bound,
    run_cli,
    run_moment_drift_experiment,
    run_power_experiment,
    run_size_experiment,
    sample_projections,
    sas_inverse_transform,
    simulate_bivariate_matern,
    simulate_moving_average,
    solve_effective_range,
    uit_test,
    univariate_jb,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
