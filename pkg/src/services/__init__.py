"""
Service layer for Detector RTI.

Contains the imaging computations (geometry, channel, noise, detector,
classifier, reconstruction, localization), the simulator and per-frame
pipeline, evaluation, and scenario file I/O.
"""

from src.services.classifier import CalibrationError, calibrate, fit_path_loss
from src.services.channel import ChannelError, envelope_pair, los_power, zeta
from src.services.detector import DetectorError, compute_threshold, decide, majority_vote
from src.services.evaluation import (
    EvaluationError,
    FitConvergenceError,
    error_stats,
    fit_distribution,
    ks_test,
)
from src.services.geometry import GeometryError, ellipse_area, excess_path_length
from src.services.localization import NoOccupancyError, localize_field
from src.services.noise import NoiseError, berry_esseen_bound, sample_power_sum
from src.services.pipeline import LocalizationPipeline
from src.services.reconstruction import (
    OperationCounter,
    PartitionError,
    ReconstructionError,
    build_indicator,
    build_scale,
    occupancy_field,
    partition_regions,
)
from src.services.scenario_io import ConfigError, ScenarioFormatError, load_scenario
from src.services.simulator import ScenarioRun, SimulationError, run_scenario

__all__ = [
    # Geometry and channel
    "GeometryError",
    "ellipse_area",
    "excess_path_length",
    "ChannelError",
    "envelope_pair",
    "los_power",
    "zeta",
    # Noise
    "NoiseError",
    "berry_esseen_bound",
    "sample_power_sum",
    # Detection and calibration
    "DetectorError",
    "compute_threshold",
    "decide",
    "majority_vote",
    "CalibrationError",
    "calibrate",
    "fit_path_loss",
    # Reconstruction and localization
    "OperationCounter",
    "PartitionError",
    "ReconstructionError",
    "build_indicator",
    "build_scale",
    "occupancy_field",
    "partition_regions",
    "NoOccupancyError",
    "localize_field",
    # Simulation
    "LocalizationPipeline",
    "ScenarioRun",
    "SimulationError",
    "run_scenario",
    # Evaluation and I/O
    "EvaluationError",
    "FitConvergenceError",
    "error_stats",
    "fit_distribution",
    "ks_test",
    "ConfigError",
    "ScenarioFormatError",
    "load_scenario",
]
