"""Distortion risk measures of sums of dependent losses under distorted Archimedean copulas."""

from .aggregate import (
    PortfolioModel,
    QuadratureConfig,
    RiskReport,
    cdrm,
    drm,
    expectation,
    risk_report,
    sandwich_check,
    sum_cdf,
    sum_cdf_distorted,
    table_scan,
)
from .copula import ArchimedeanCopula, Clayton, Frank, Gumbel, Product, distort, kendall_tau, spearman_rho
from .distortion import CTE, LogCopula, LookBack, Mobius, Morillas, PowerCopula, PowerTail, WangNormal
from .margins import Exponential, Pareto

__version__ = "0.1.0"

__all__ = [
    "ArchimedeanCopula", "CTE", "Clayton", "Exponential", "Frank", "Gumbel", "LogCopula", "LookBack", "Mobius",
    "Morillas", "Pareto", "PortfolioModel", "PowerCopula", "PowerTail", "Product", "QuadratureConfig",
    "RiskReport", "WangNormal", "cdrm", "distort", "drm", "expectation", "kendall_tau", "risk_report",
    "sandwich_check", "spearman_rho", "sum_cdf", "sum_cdf_distorted", "table_scan",
]
