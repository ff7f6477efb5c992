"""Subset-optimal differentially private estimation of one-dimensional statistics."""

from .dataset import (
    DataFormatError,
    Grid,
    Interval,
    RankSet,
    SortedDataset,
    clip,
    distance,
    dominates,
    lower_trim,
    quantize,
    rank_error,
    ranks_of,
    read_values,
    upper_trim,
)
from .mean import (
    BoundedMeanParams,
    SubsetMeanParams,
    bounded_mean,
    risk_proxy,
    subset_optimal_mean,
    trim_bias_ratio_check,
)
from .monotone import (
    MonotoneParams,
    PipelineError,
    PropertySpec,
    estimate_monotone,
    inverse_sensitivity,
    mean_spec,
    median_spec,
    lp_spec,
    quantile_spec,
    theta_lp,
)
from .noise import PiecewiseConstantDensity, Rng, ZeroNoiseRng
from .report import EstimateReport
from .threshold import (
    ThresholdParams,
    beta_for,
    build_loss,
    private_threshold,
    private_threshold_grid,
    upper_rank_threshold,
)

__version__ = "0.1.0"
