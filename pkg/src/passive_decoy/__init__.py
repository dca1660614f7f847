"""Passive decoy-state QKD numerical engine.

Photon-number statistics of a two-laser passively switched source, the
decoy security-bound chain with its GLLP-style key rate, an analytic plus
pulse-level Monte Carlo forward model of the full link, and a deterministic
source-parameter optimizer.
"""

from .bounds import (E1Upper, KeyRateParams, KeyRateReport, ObservedStatistics,
                     Y0Bounds, binary_entropy, e1_upper, key_rate,
                     single_photon_bound, y0_bounds, y1_lower)
from .config import Numerics, RunConfig, load_run_config, run_config_from_dict
from .errors import (ConfigError, DegenerateSourceError, IngestError,
                     NoSinglePhotonYieldError, ParameterError, TruncationError)
from .optimize import (AxisSpec, OptimizationResult, ScanRow, SearchSpace,
                       optimize, scan_rate_vs_distance)
from .records import (ClickRecord, IngestedStatistics, RecordBatch, TallyCounts,
                      ingest_records, write_records_csv)
from .simulate import (ChannelModel, GroundTruth, HomScan, MonteCarloResult,
                       PredictedStatistics, fit_channel_to_observed,
                       hom_coincidence_scan, monte_carlo_run,
                       predicted_statistics)
from .statistics import (BranchDistributions, InterferenceKernel,
                         PulsePairParams, ThresholdDetector, branch_distributions,
                         branch_mean, g2, joint_probability,
                         joint_probability_matrix)

__version__ = "0.1.0"

__all__ = [
    "AxisSpec", "BranchDistributions", "ChannelModel", "ClickRecord",
    "ConfigError", "DegenerateSourceError", "E1Upper", "GroundTruth",
    "HomScan", "IngestError", "IngestedStatistics", "InterferenceKernel",
    "KeyRateParams", "KeyRateReport", "MonteCarloResult",
    "NoSinglePhotonYieldError", "Numerics", "ObservedStatistics",
    "OptimizationResult", "ParameterError", "PredictedStatistics",
    "PulsePairParams", "RecordBatch", "RunConfig", "ScanRow", "SearchSpace",
    "TallyCounts", "ThresholdDetector", "TruncationError", "Y0Bounds",
    "binary_entropy", "branch_distributions", "branch_mean", "e1_upper",
    "fit_channel_to_observed", "g2", "hom_coincidence_scan",
    "ingest_records", "joint_probability", "joint_probability_matrix",
    "key_rate", "load_run_config", "monte_carlo_run", "optimize",
    "predicted_statistics", "run_config_from_dict", "scan_rate_vs_distance",
    "single_photon_bound", "write_records_csv", "y0_bounds", "y1_lower",
]
