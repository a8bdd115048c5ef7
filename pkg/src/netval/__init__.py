"""Valuation in liability networks with bankruptcy costs.

The package computes greatest clearing wealths, comonotonic solvency
thresholds and closed-form expectations, distribution-free pricing
bounds, CAPM debt price bounds with single-firm baselines, and
balance-sheet calibration, plus Monte Carlo and region-enumeration
oracles for cross-checking.
"""

from .bounds import (
    BoundResult,
    BoundsError,
    MarginalSet,
    TabulatedQuantile,
    comonotonic_lower,
    conditional_upper,
    jensen_upper,
)
from .calibration import (
    BalanceSheet,
    CalibrationError,
    CalibrationResult,
    SchemaError,
    calibrate,
    calibrated_network,
    current_ratio,
    fill_matrix,
    make_synthetic_sheets,
    network_csv_text,
    random_sparsity_mask,
    ratio_via_assets,
    ratio_via_liabilities,
    read_balance_sheets_csv,
    read_network_csv,
    write_balance_sheets_csv,
    write_network_csv,
)
from .capm import (
    CapmParams,
    MertonBaseline,
    PricingError,
    capm_thresholds,
    debt_price_bound,
    effective_rate,
    hat_eta,
    market_cap,
    merton_baseline,
)
from .clearing import (
    ClearingResult,
    delta_matrix,
    delta_vector,
    greatest_clearing,
    greatest_clearing_batch,
    psi_star,
)
from .comonotonic import (
    AffineMap,
    Empirical,
    ExpectedValues,
    FactorModel,
    LogNormal,
    ModelError,
    PointMass,
    PowerMap,
    QuadratureError,
    SolvencyThresholds,
    TabulatedMap,
    Uniform01,
    expected_values,
    partial_expectation,
    solvency_thresholds,
)
from .network import FinancialNetwork, NetworkError, build_network, network_from_relative
from .oracle import (
    DefaultRegion,
    ExactExpectations,
    MCExpectations,
    OracleError,
    ScenarioBatch,
    classify,
    classify_batch,
    enumerate_regions,
    exact_expectations,
    mc_expectations,
    region_wealth,
    simulate,
    thresholds_by_clearing_bisection,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "BalanceSheet",
    "BoundResult",
    "BoundsError",
    "CalibrationError",
    "CalibrationResult",
    "CapmParams",
    "ClearingResult",
    "DefaultRegion",
    "Empirical",
    "ExactExpectations",
    "ExpectedValues",
    "FactorModel",
    "FinancialNetwork",
    "LogNormal",
    "MCExpectations",
    "MarginalSet",
    "MertonBaseline",
    "ModelError",
    "NetworkError",
    "OracleError",
    "PointMass",
    "PowerMap",
    "PricingError",
    "QuadratureError",
    "ScenarioBatch",
    "SchemaError",
    "SolvencyThresholds",
    "TabulatedMap",
    "TabulatedQuantile",
    "Uniform01",
    "build_network",
    "calibrate",
    "calibrated_network",
    "capm_thresholds",
    "classify",
    "classify_batch",
    "comonotonic_lower",
    "conditional_upper",
    "current_ratio",
    "debt_price_bound",
    "delta_matrix",
    "delta_vector",
    "effective_rate",
    "enumerate_regions",
    "exact_expectations",
    "expected_values",
    "fill_matrix",
    "greatest_clearing",
    "greatest_clearing_batch",
    "hat_eta",
    "jensen_upper",
    "make_synthetic_sheets",
    "market_cap",
    "mc_expectations",
    "merton_baseline",
    "network_csv_text",
    "network_from_relative",
    "partial_expectation",
    "psi_star",
    "random_sparsity_mask",
    "ratio_via_assets",
    "ratio_via_liabilities",
    "read_balance_sheets_csv",
    "read_network_csv",
    "region_wealth",
    "simulate",
    "solvency_thresholds",
    "thresholds_by_clearing_bisection",
    "write_balance_sheets_csv",
    "write_network_csv",
]
