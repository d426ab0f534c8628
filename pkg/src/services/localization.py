"""
Localization Service.

Single-target position estimate from an occupancy field: keep the pixels
within factor a of the field maximum and return their weighted centroid.
"""

import logging

import numpy as np
from scipy import ndimage

from src.models.common import Point, RTIError
from src.models.deployment import Grid
from src.models.field import OccupancyField, PositionEstimate

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD_SCALE = 0.75


class LocalizationError(RTIError, ValueError):
    """Invalid estimator parameters."""


class NoOccupancyError(RTIError):
    """The field is zero everywhere; there is no position to report."""


def threshold_field(field: OccupancyField, scale: float = DEFAULT_THRESHOLD_SCALE) -> np.ndarray:
    """Masked field: values >= a * P* kept, the rest zeroed."""
    if not 0.0 < scale < 1.0:
        raise LocalizationError(f"threshold scale must be in (0, 1), got {scale}")
    peak = field.peak
    if peak <= 0.0:
        raise NoOccupancyError("no occupancy detected")
    return np.where(field.values >= scale * peak, field.values, 0.0)


def estimate_position(masked: np.ndarray, grid: Grid) -> PositionEstimate:
    """Weighted centroid of the masked field's pixel centers."""
    masked = np.asarray(masked, dtype=float)
    support = masked > 0.0
    if not np.any(support):
        raise NoOccupancyError("no occupancy detected")
    weights = masked[support] / masked[support].sum()
    centroid = weights @ grid.centers[support]
    return PositionEstimate(
        position=(float(centroid[0]), float(centroid[1])),
        peak=float(masked.max()),
        support_pixels=int(support.sum()),
        connected=support_is_connected(support, grid),
    )


def distance_error(estimate: Point, truth: Point) -> float:
    """Euclidean distance between estimate and true position."""
    return float(np.hypot(estimate[0] - truth[0], estimate[1] - truth[1]))


def support_is_connected(mask: np.ndarray, grid: Grid) -> bool:
    """Whether the supporting pixels form one 4-connected component."""
    _, components = ndimage.label(np.asarray(mask, dtype=bool).reshape(grid.rows, grid.cols))
    return components <= 1


def localize_field(field: OccupancyField, scale: float = DEFAULT_THRESHOLD_SCALE) -> PositionEstimate:
    """Threshold then centroid; raises NoOccupancyError on an empty field."""
    estimate = estimate_position(threshold_field(field, scale), field.grid)
    if not estimate.connected:
        logger.debug(f"Mode region of {estimate.support_pixels} pixels is disconnected")
    return estimate
