"""
Reconstruction Service.

Builds the indicator and weight matrices of the back-projection and evaluates
the occupancy field. The per-frame evaluation only adds stored weights: for
every non-blacklisted detecting pair, in ascending pair id, its weights are
added to the pixels it covers in ascending pixel order. Region partitions
keep that per-pixel order, so partitioned and whole-grid fields are
bit-identical.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.models.common import RTIError
from src.models.deployment import Deployment, Grid
from src.models.detection import Blacklist
from src.models.field import IndicatorMatrix, OccupancyField, ScaleMode, WeightMatrix
from src.services.geometry import ellipse_area, excess_path_lengths

logger = logging.getLogger(__name__)

# (row_start, row_stop, col_start, col_stop), half-open pixel ranges
Rectangle = tuple[int, int, int, int]


class ReconstructionError(RTIError, ValueError):
    """Inconsistent matrix, blacklist or detection dimensions."""


class PartitionError(RTIError, ValueError):
    """Regions overlap, leave pixels uncovered or cannot be laid out."""


class OperationCounter(BaseModel):
    """
    Arithmetic performed by a field evaluation.

    The addition-only paths never multiply; `dense_occupancy` counts the
    products of the full matrix-vector form for comparison.
    """

    additions: int = 0
    multiplications: int = 0
    comparisons: int = 0
    frames: int = 0

    def merge(self, other: "OperationCounter") -> None:
        self.additions += other.additions
        self.multiplications += other.multiplications
        self.comparisons += other.comparisons
        self.frames += other.frames


# =============================================================================
# Matrices
# =============================================================================


def build_indicator(grid: Grid, deployment: Deployment, max_excess_path: float) -> IndicatorMatrix:
    """
    Indicator column per transmitter-receiver pair.

    Pixel n is in column l iff the excess path length of its center for
    pair l is at most Delta_t.
    """
    if max_excess_path <= 0:
        raise ReconstructionError(f"maximum excess path length must be positive, got {max_excess_path}")
    columns: list[np.ndarray] = []
    for pair_id in range(len(deployment.pairs)):
        p_t, p_r = deployment.pair_endpoints(pair_id)
        delta = excess_path_lengths(grid.centers, p_t, p_r)
        columns.append(np.flatnonzero(delta <= max_excess_path).astype(np.int64))
    empty = sum(1 for c in columns if c.size == 0)
    if empty:
        logger.warning(f"{empty} of {len(columns)} pairs cover no pixel of the grid")
    logger.debug(f"Indicator: {grid.pixel_count} pixels x {len(columns)} pairs")
    return IndicatorMatrix(
        pixel_count=grid.pixel_count,
        max_excess_path=max_excess_path,
        columns=columns,
        link_lengths=np.asarray(deployment.pair_lengths, dtype=float),
    )


def build_scale(indicator: IndicatorMatrix, mode: ScaleMode = "count") -> WeightMatrix:
    """
    Row-normalized weights on the indicator's sparsity pattern.

    Column l carries 1/c_l in count mode (c_l its pixel count) or 1/A(d_l, Delta_t)
    in area mode; each covered pixel's weights are divided by their sum so the
    row adds up to one.
    """
    if mode == "count":
        inverse = [1.0 / c.size if c.size else 0.0 for c in indicator.columns]
    elif mode == "area":
        inverse = [
            1.0 / ellipse_area(float(d), indicator.max_excess_path) for d in indicator.link_lengths
        ]
    else:
        raise ReconstructionError(f"unknown scale mode '{mode}'")

    normalizer = np.zeros(indicator.pixel_count)
    for pixels, inv in zip(indicator.columns, inverse):
        normalizer[pixels] += inv
    weights = [inv / normalizer[pixels] for pixels, inv in zip(indicator.columns, inverse)]
    return WeightMatrix(
        pixel_count=indicator.pixel_count,
        mode=mode,
        columns=list(indicator.columns),
        weights=weights,
    )


# =============================================================================
# Field evaluation
# =============================================================================


def _check_vectors(link_count: int, usable: Blacklist, detections: Sequence[int]) -> None:
    if len(usable) != link_count or len(detections) != link_count:
        raise ReconstructionError(
            f"dimension mismatch: {link_count} columns, {len(usable)} blacklist flags, "
            f"{len(detections)} detections"
        )


def occupancy_field(
    weights: WeightMatrix,
    usable: Blacklist,
    detections: Sequence[int],
    grid: Grid,
    counter: Optional[OperationCounter] = None,
) -> OccupancyField:
    """Back-projection field W diag(iota) xi using additions only."""
    if grid.pixel_count != weights.pixel_count:
        raise ReconstructionError("grid and weight matrix disagree on the pixel count")
    _check_vectors(weights.link_count, usable, detections)
    values = np.zeros(weights.pixel_count)
    additions = 0
    for flag, hit, pixels, w in zip(usable.usable, detections, weights.columns, weights.weights):
        if flag and hit:
            values[pixels] += w
            additions += pixels.size
    if counter is not None:
        counter.additions += additions
        counter.comparisons += 2 * weights.link_count
        counter.frames += 1
    return OccupancyField(values=values, grid=grid)


def dense_occupancy(
    weights: WeightMatrix,
    usable: Blacklist,
    detections: Sequence[int],
    counter: Optional[OperationCounter] = None,
) -> np.ndarray:
    """Dense matrix-vector reference for the field."""
    _check_vectors(weights.link_count, usable, detections)
    if counter is not None:
        # mask product per pair, then one product per matrix entry
        links, pixels = weights.link_count, weights.pixel_count
        counter.multiplications += links + pixels * links
        counter.additions += pixels * max(links - 1, 0)
        counter.frames += 1
    active = np.asarray(usable.usable, dtype=float) * np.asarray(detections, dtype=float)
    return weights.to_dense() @ active


# =============================================================================
# Region partitioning
# =============================================================================


class RegionSlice(BaseModel):
    """The part of one weight column that falls inside a region."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    link: int
    pixels: np.ndarray
    weights: np.ndarray


class Region(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bounds: Rectangle
    pixels: np.ndarray = Field(..., description="Ascending global pixel ids")
    slices: list[RegionSlice]


class RegionPartition(BaseModel):
    """Rectangular regions covering the grid, each with its own weight slices."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    labels: np.ndarray = Field(..., description="Region index of every pixel")
    regions: list[Region]
    link_count: int

    def occupancy(
        self,
        usable: Blacklist,
        detections: Sequence[int],
        counter: Optional[OperationCounter] = None,
    ) -> OccupancyField:
        """Field evaluated region by region and scattered back to grid order."""
        _check_vectors(self.link_count, usable, detections)
        values = np.zeros(self.grid.pixel_count)
        additions = 0
        for region in self.regions:
            # pixels are ascending, so each slice lands in region order
            for piece in region.slices:
                if usable.usable[piece.link] and detections[piece.link]:
                    values[piece.pixels] += piece.weights
                    additions += piece.pixels.size
        if counter is not None:
            counter.additions += additions
            counter.comparisons += 2 * sum(len(r.slices) for r in self.regions)
            counter.frames += 1
        return OccupancyField(values=values, grid=self.grid)

    def region_additions(self, usable: Blacklist, detections: Sequence[int]) -> list[int]:
        """Additions each region would spend on this frame."""
        return [
            sum(
                piece.pixels.size
                for piece in region.slices
                if usable.usable[piece.link] and detections[piece.link]
            )
            for region in self.regions
        ]


def _split(length: int, parts: int) -> list[int]:
    return [round(k * length / parts) for k in range(parts + 1)]


def grid_rectangles(grid: Grid, count: int) -> list[Rectangle]:
    """Split the grid into `count` near-equal rectangles, as square a layout as possible."""
    if count < 1:
        raise PartitionError("region count must be at least 1")
    row_parts = max(d for d in range(1, math.isqrt(count) + 1) if count % d == 0)
    col_parts = count // row_parts
    if grid.cols < grid.rows:
        row_parts, col_parts = col_parts, row_parts
    if row_parts > grid.rows or col_parts > grid.cols:
        raise PartitionError(f"a {grid.rows}x{grid.cols} grid cannot hold {count} regions")
    rows = _split(grid.rows, row_parts)
    cols = _split(grid.cols, col_parts)
    return [
        (rows[i], rows[i + 1], cols[j], cols[j + 1])
        for i in range(row_parts)
        for j in range(col_parts)
    ]


def partition_regions(
    grid: Grid,
    regions: int | Sequence[Rectangle],
    weights: WeightMatrix,
) -> RegionPartition:
    """
    Partition the grid into rectangles and slice every weight column per region.

    `regions` is a region count or an explicit list of half-open pixel
    rectangles that must tile the grid exactly.
    """
    rectangles = grid_rectangles(grid, regions) if isinstance(regions, int) else list(regions)
    if not rectangles:
        raise PartitionError("no regions given")
    labels = np.full((grid.rows, grid.cols), -1, dtype=np.int64)
    for index, (r0, r1, c0, c1) in enumerate(rectangles):
        if not (0 <= r0 < r1 <= grid.rows and 0 <= c0 < c1 <= grid.cols):
            raise PartitionError(f"region {index} {rectangles[index]} is empty or outside the grid")
        if np.any(labels[r0:r1, c0:c1] >= 0):
            raise PartitionError(f"region {index} overlaps another region")
        labels[r0:r1, c0:c1] = index
    if np.any(labels < 0):
        raise PartitionError(f"regions leave {int(np.sum(labels < 0))} pixels uncovered")
    flat = labels.ravel()

    slices: list[list[RegionSlice]] = [[] for _ in rectangles]
    for link, (pixels, w) in enumerate(zip(weights.columns, weights.weights)):
        owner = flat[pixels]
        for index in np.unique(owner):
            selected = owner == index
            slices[int(index)].append(RegionSlice(link=link, pixels=pixels[selected], weights=w[selected]))

    built = [
        Region(bounds=rect, pixels=np.flatnonzero(flat == index), slices=slices[index])
        for index, rect in enumerate(rectangles)
    ]
    logger.debug(f"Partitioned {grid.pixel_count} pixels into {len(built)} regions")
    return RegionPartition(grid=grid, labels=flat, regions=built, link_count=weights.link_count)


# =============================================================================
# Export
# =============================================================================


def export_csv(field: OccupancyField, path: Path | str) -> None:
    """Write `row,col,value` for every pixel, values in round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["row", "col", "value"])
        for n, value in enumerate(field.values):
            row, col = field.grid.row_col(n)
            writer.writerow([row, col, repr(float(value))])


def export_pgm(field: OccupancyField, path: Path | str) -> None:
    """Write an 8-bit binary PGM, gray = round(255 * value), north up."""
    image = np.flipud(field.as_image())
    gray = np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    header = f"P5\n{field.grid.cols} {field.grid.rows}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(gray.tobytes())
