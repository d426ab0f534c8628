"""
Reconstruction and localization models.

Matrices are stored column-wise (one column per transmitter-receiver pair) as
ascending pixel-index arrays, which is the sparse form the per-frame
back-projection consumes.
"""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.models.common import Point
from src.models.deployment import Grid

ScaleMode = Literal["count", "area"]


class IndicatorMatrix(BaseModel):
    """Binary N x L matrix; column l lists the pixels whose excess path length is <= Delta_t."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pixel_count: int = Field(..., gt=0)
    max_excess_path: float = Field(..., gt=0.0)
    columns: list[np.ndarray]
    link_lengths: np.ndarray

    @property
    def link_count(self) -> int:
        return len(self.columns)

    @property
    def column_counts(self) -> np.ndarray:
        return np.array([len(c) for c in self.columns], dtype=np.int64)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.pixel_count, self.link_count), dtype=np.uint8)
        for l, pixels in enumerate(self.columns):
            dense[pixels, l] = 1
        return dense


class WeightMatrix(BaseModel):
    """Non-negative N x L weights with the sparsity pattern of the indicator."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pixel_count: int = Field(..., gt=0)
    mode: ScaleMode
    columns: list[np.ndarray]
    weights: list[np.ndarray]

    @property
    def link_count(self) -> int:
        return len(self.columns)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.pixel_count, self.link_count), dtype=float)
        for l, (pixels, w) in enumerate(zip(self.columns, self.weights)):
            dense[pixels, l] = w
        return dense

    def row_sums(self) -> np.ndarray:
        sums = np.zeros(self.pixel_count, dtype=float)
        for pixels, w in zip(self.columns, self.weights):
            sums[pixels] += w
        return sums


class OccupancyField(BaseModel):
    """Per-pixel occupancy values on a grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    grid: Grid

    @property
    def peak(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def as_image(self) -> np.ndarray:
        """Values reshaped to (rows, cols)."""
        return self.values.reshape(self.grid.rows, self.grid.cols)


class PositionEstimate(BaseModel):
    """Weighted-centroid position of the mode region."""

    model_config = ConfigDict(frozen=True)

    position: Point
    peak: float = Field(..., description="Field maximum P*")
    support_pixels: int = Field(..., ge=1)
    connected: bool = True
