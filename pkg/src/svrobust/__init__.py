"""Calibration robustness workbench for Heston, Bates and fractional SV option models."""

from .bootstrap import BootstrapConfig, BootstrapRun, bootstrap_mean, draw_sample, run_bootstrap
from .calibration import CalibrationResult, Objective, calibrate, compute_aare, evaluate_objective
from .market_data import OptionQuote, OptionSurface, compute_weights, load_surface, mid_prices
from .mc_filter import FilterReport, filter_test, ks_two_sample, split_by_aare
from .models import BatesParams, FSVParams, HestonParams, ParamBounds, validate
from .pricing import McConfig, PricingRequest, price_bates, price_fsv, price_heston, price_surface
from .robustness import pairwise_correlations, price_dispersion, qn_plot_data, scatter_data
from .synthetic import SynthSpec, generate_surface

__all__ = [
    "BatesParams",
    "BootstrapConfig",
    "BootstrapRun",
    "CalibrationResult",
    "FSVParams",
    "FilterReport",
    "HestonParams",
    "McConfig",
    "Objective",
    "OptionQuote",
    "OptionSurface",
    "ParamBounds",
    "PricingRequest",
    "SynthSpec",
    "bootstrap_mean",
    "calibrate",
    "compute_aare",
    "compute_weights",
    "draw_sample",
    "evaluate_objective",
    "filter_test",
    "generate_surface",
    "ks_two_sample",
    "load_surface",
    "mid_prices",
    "pairwise_correlations",
    "price_bates",
    "price_dispersion",
    "price_fsv",
    "price_heston",
    "price_surface",
    "qn_plot_data",
    "run_bootstrap",
    "scatter_data",
    "split_by_aare",
    "validate",
]
