"""
Localization pipeline.

Stateful per-frame chain: center each received RSS on its calibration
estimate, run the link detectors, fuse channels per pair, back-project the
non-blacklisted detections and localize the mode region. Simulation and
replay of recorded frames both go through `process_frame`, so replaying a
run's frames reproduces its estimates exactly.
"""

import logging
from itertools import groupby
from typing import Optional, Sequence

import numpy as np

from src.models.deployment import Deployment, Grid
from src.models.detection import CalibrationResult, DetectorConfig
from src.models.field import OccupancyField, WeightMatrix
from src.models.scenario import EstimateRecord, FrameRecord, ScenarioConfig
from src.services.classifier import CalibrationError
from src.services.detector import LinkDetector, fuse_pairs, pack_detections, thresholds_for_deployment
from src.services.localization import NoOccupancyError, distance_error, localize_field
from src.services.reconstruction import (
    OperationCounter,
    build_indicator,
    build_scale,
    occupancy_field,
    partition_regions,
)

logger = logging.getLogger(__name__)


class LocalizationPipeline:
    """
    Per-frame localization over a fixed deployment and calibration.

    Links keep their latest decision until they are measured again; every
    processed frame yields one estimate from the current pair decisions.
    """

    def __init__(
        self,
        deployment: Deployment,
        grid: Grid,
        calibration: CalibrationResult,
        detector: DetectorConfig,
        weights: WeightMatrix,
        threshold_scale: float = 0.75,
        smoothing_window: int = 1,
        regions: int = 1,
    ):
        pair_count = len(deployment.pairs)
        if len(calibration.los_power) != deployment.link_count:
            raise CalibrationError(
                f"calibration covers {len(calibration.los_power)} links, "
                f"deployment has {deployment.link_count}"
            )
        if len(calibration.blacklist) != pair_count or weights.link_count != pair_count:
            raise CalibrationError(f"blacklist and weights must cover the {pair_count} link pairs")
        if len(detector.thresholds) != deployment.link_count:
            raise CalibrationError("one detector threshold per link is required")

        self.deployment = deployment
        self.grid = grid
        self.calibration = calibration
        self.detector = detector
        self.weights = weights
        self.threshold_scale = threshold_scale
        self.reference = np.asarray(calibration.los_power, dtype=float)
        self.usable = np.asarray(calibration.blacklist.usable, dtype=np.uint8)
        self.detectors = [LinkDetector(z, smoothing_window) for z in detector.thresholds]
        self.link_decisions = np.zeros(deployment.link_count, dtype=np.uint8)
        self.partition = partition_regions(grid, regions, weights) if regions > 1 else None
        self.counter = OperationCounter()
        self.bitstream: list[bytes] = []
        self.last_field: Optional[OccupancyField] = None

    @classmethod
    def from_config(
        cls,
        config: ScenarioConfig,
        deployment: Deployment,
        grid: Grid,
        calibration: CalibrationResult,
    ) -> "LocalizationPipeline":
        detector = thresholds_for_deployment(
            deployment,
            config.model.gamma,
            config.model.path_loss_exponent,
            config.detector.max_excess_path_m,
        )
        indicator = build_indicator(grid, deployment, config.detector.max_excess_path_m)
        weights = build_scale(indicator, config.reconstruction.scale_mode)
        return cls(
            deployment,
            grid,
            calibration,
            detector,
            weights,
            threshold_scale=config.estimator.threshold_scale,
            smoothing_window=config.detector.smoothing_window,
            regions=config.reconstruction.regions,
        )

    def process_frame(self, frame: int, records: Sequence[FrameRecord]) -> EstimateRecord:
        """Consume one frame's measurements and estimate the object position."""
        for r in records:
            z = r.rss_db - self.reference[r.link]
            self.link_decisions[r.link] = self.detectors[r.link].observe(z)

        hits = fuse_pairs(self.link_decisions, self.deployment)
        self.bitstream.append(pack_detections(hits))
        if self.partition is not None:
            field = self.partition.occupancy(self.calibration.blacklist, hits, self.counter)
        else:
            field = occupancy_field(self.weights, self.calibration.blacklist, hits, self.grid, self.counter)
        self.last_field = field

        truth = records[0].true_position if records else None
        time_s = records[0].time_s if records else 0.0
        detecting = int(np.sum(hits & self.usable))
        try:
            estimate = localize_field(field, self.threshold_scale)
        except NoOccupancyError:
            return EstimateRecord(
                frame=frame, time_s=time_s, true_position=truth, detecting_links=detecting
            )
        return EstimateRecord(
            frame=frame,
            time_s=time_s,
            true_position=truth,
            estimate=estimate.position,
            error_m=distance_error(estimate.position, truth) if truth is not None else None,
            support_pixels=estimate.support_pixels,
            detecting_links=detecting,
        )

    def replay(self, records: Sequence[FrameRecord]) -> list[EstimateRecord]:
        """Process recorded measurements frame by frame, in file order."""
        estimates = [
            self.process_frame(frame, list(group)) for frame, group in groupby(records, key=lambda r: r.frame)
        ]
        logger.info(f"Replayed {len(estimates)} frames")
        return estimates
