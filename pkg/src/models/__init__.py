"""
Pydantic models for Detector RTI.

This package contains the domain types shared by the services: deployment and
grid geometry, propagation and noise parameters, detector and calibration
products, reconstruction matrices, scenario configuration and error statistics.
"""

from src.models.channel import PathLossParams, ReflectionParams
from src.models.common import ErrorReport, Point, RTIError
from src.models.deployment import Deployment, Grid, Link, ieee_802_15_4_frequency
from src.models.detection import (
    Blacklist,
    CalibrationResult,
    CalibrationSet,
    DetectorConfig,
    PathLossFit,
)
from src.models.evaluation import (
    Distribution,
    ErrorStats,
    FitResult,
    HistogramBin,
    ReferenceResult,
)
from src.models.field import (
    IndicatorMatrix,
    OccupancyField,
    PositionEstimate,
    ScaleMode,
    WeightMatrix,
)
from src.models.noise import DEFAULT_SAMPLES, NoiseModel
from src.models.scenario import (
    EstimateRecord,
    FrameRecord,
    ObjectShape,
    ScenarioConfig,
    TrajectoryKind,
)

__all__ = [
    # Common
    "ErrorReport",
    "Point",
    "RTIError",
    # Deployment
    "Deployment",
    "Grid",
    "Link",
    "ieee_802_15_4_frequency",
    # Propagation
    "PathLossParams",
    "ReflectionParams",
    "DEFAULT_SAMPLES",
    "NoiseModel",
    # Detection
    "Blacklist",
    "CalibrationResult",
    "CalibrationSet",
    "DetectorConfig",
    "PathLossFit",
    # Reconstruction
    "IndicatorMatrix",
    "OccupancyField",
    "PositionEstimate",
    "ScaleMode",
    "WeightMatrix",
    # Scenario
    "EstimateRecord",
    "FrameRecord",
    "ObjectShape",
    "ScenarioConfig",
    "TrajectoryKind",
    # Evaluation
    "Distribution",
    "ErrorStats",
    "FitResult",
    "HistogramBin",
    "ReferenceResult",
]
