"""Pricing bands for European calls under a randomly perturbed short rate.

The package computes the deterministic call price, the variance of the
price fluctuations induced by a rapidly mixing zero-mean rate perturbation
(by kernel quadrature, by a 2-D covariance PDE, and by Monte Carlo over the
per-path pricing problem), the resulting bid/ask pricing bands, and the
implied-volatility skew obtained by quoting the band's upper edge.
"""

from .bscore import (GreeksRecord, MarketParams, bs_call, green_function,
                     norm_cdf, norm_pdf, source_term)
from .errors import (AccuracyError, ArbBandsError, ConfigError, NoRootError,
                     ParameterError, SolverError)
from .mc import (PathStats, ensemble_stats, ensure_path_reduction_gate,
                 path_price_exact, path_price_fd)
from .noise import (CltCheckResult, IntensityEstimate, NoisePath,
                    OrnsteinUhlenbeck, Telegraph, ZeroNoise,
                    analytic_intensity, clt_variance_check,
                    empirical_intensity, sample_path)
from .pde import (GridSpec, SurfaceGrid, default_domain, extract_diagonal,
                  solve_bs_pde, solve_covariance_pde, variance_u_pde)
from .smile import SmilePoint, implied_vol, smile_curve
from .variance import (ArbitrageParams, BandResult, ensure_closed_form_gate,
                       inner_integral, pricing_band, variance_u,
                       variance_u_closed_call, variance_u_quadrature)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # closed-form core
    "MarketParams", "GreeksRecord", "bs_call", "source_term",
    "green_function", "norm_cdf", "norm_pdf",
    # noise models
    "OrnsteinUhlenbeck", "Telegraph", "ZeroNoise", "NoisePath",
    "IntensityEstimate", "CltCheckResult", "analytic_intensity",
    "sample_path", "empirical_intensity", "clt_variance_check",
    # fluctuation variance and bands
    "ArbitrageParams", "BandResult", "inner_integral",
    "variance_u_quadrature", "variance_u_closed_call", "variance_u",
    "ensure_closed_form_gate", "pricing_band",
    # finite differences
    "GridSpec", "SurfaceGrid", "default_domain", "solve_bs_pde",
    "solve_covariance_pde", "extract_diagonal", "variance_u_pde",
    # Monte Carlo
    "PathStats", "path_price_exact", "path_price_fd",
    "ensure_path_reduction_gate", "ensemble_stats",
    # smile
    "SmilePoint", "implied_vol", "smile_curve",
    # errors
    "ArbBandsError", "ConfigError", "ParameterError", "SolverError",
    "AccuracyError", "NoRootError",
]
