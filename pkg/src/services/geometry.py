"""
Geometry Service.

Excess path length, ellipse area, the excess path length rate of change and
per-pixel excess path lengths. Everything here is a pure function of
immutable inputs.
"""

import logging
import math

import numpy as np

from src.models.common import Point, RTIError
from src.models.deployment import Deployment, Grid, ieee_802_15_4_frequency

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class GeometryError(RTIError, ValueError):
    """Invalid geometric input (degenerate link, negative width, ...)."""


def _as_point(p: Point | np.ndarray) -> np.ndarray:
    return np.asarray(p, dtype=float)


def channel_frequency(channel: int) -> float:
    """Carrier frequency in Hz of an IEEE 802.15.4 channel."""
    try:
        return ieee_802_15_4_frequency(channel)
    except ValueError as e:
        raise GeometryError(str(e)) from e


def wavelength(frequency: float) -> float:
    """Wavelength c0 / f_c in meters."""
    if frequency <= 0:
        raise GeometryError(f"frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


def excess_path_length(p: Point | np.ndarray, p_t: Point | np.ndarray, p_r: Point | np.ndarray) -> float:
    """
    Extra length of the path p_t -> p -> p_r over the direct path p_t -> p_r.

    Constant on every ellipse with foci p_t and p_r; zero on the link segment.
    """
    p, p_t, p_r = _as_point(p), _as_point(p_t), _as_point(p_r)
    if np.array_equal(p_t, p_r):
        raise GeometryError("transmitter and receiver positions coincide")
    delta = np.linalg.norm(p - p_r) + np.linalg.norm(p - p_t) - np.linalg.norm(p_r - p_t)
    # rounding can leave -1e-16 on the segment
    return max(float(delta), 0.0)


def excess_path_lengths(points: np.ndarray, p_t: Point | np.ndarray, p_r: Point | np.ndarray) -> np.ndarray:
    """Vectorized excess_path_length over an (n, 2) array of points."""
    points = np.asarray(points, dtype=float)
    p_t, p_r = _as_point(p_t), _as_point(p_r)
    if np.array_equal(p_t, p_r):
        raise GeometryError("transmitter and receiver positions coincide")
    d = np.linalg.norm(p_r - p_t)
    delta = np.linalg.norm(points - p_r, axis=-1) + np.linalg.norm(points - p_t, axis=-1) - d
    return np.maximum(delta, 0.0)


def ellipse_area(d: float, delta: float) -> float:
    """
    Area of the ellipse with foci d apart whose points have excess path length delta.

    A(d, delta) = pi/4 (d + delta) sqrt(2 d delta + delta^2)
    """
    if d <= 0:
        raise GeometryError(f"link length must be positive, got {d}")
    if delta < 0:
        raise GeometryError(f"excess path length must be non-negative, got {delta}")
    return math.pi / 4.0 * (d + delta) * math.sqrt(2.0 * d * delta + delta * delta)


def excess_path_rate(
    p: Point | np.ndarray,
    v: Point | np.ndarray,
    p_t: Point | np.ndarray,
    p_r: Point | np.ndarray,
) -> float:
    """
    Time derivative of the excess path length of a point moving with velocity v.

    The derivative does not exist when p coincides with either link endpoint.
    """
    p, v, p_t, p_r = _as_point(p), _as_point(v), _as_point(p_t), _as_point(p_r)
    to_rx = p - p_r
    to_tx = p - p_t
    n_rx = np.linalg.norm(to_rx)
    n_tx = np.linalg.norm(to_tx)
    if n_rx == 0.0 or n_tx == 0.0:
        raise GeometryError("excess path rate is undefined at a link endpoint")
    return float(np.dot(to_rx / n_rx + to_tx / n_tx, v))


def pixel_excess_lengths(grid: Grid, deployment: Deployment, link_id: int) -> np.ndarray:
    """Excess path length of every pixel center for one link."""
    if not 0 <= link_id < deployment.link_count:
        raise GeometryError(f"unknown link id {link_id}")
    p_t, p_r = deployment.link_endpoints(link_id)
    return excess_path_lengths(grid.centers, p_t, p_r)


def perimeter_nodes(width: float, height: float, count: int, offset: float = 0.0,
                    origin: Point = (0.0, 0.0)) -> list[Point]:
    """
    Evenly spaced nodes on the perimeter of a width x height rectangle.

    A positive offset pushes every node outward, perpendicular to its side,
    so the nodes sit outside the monitored region.
    """
    if count < 2:
        raise GeometryError("a perimeter deployment needs at least two nodes")
    perimeter = 2.0 * (width + height)
    step = perimeter / count
    nodes: list[Point] = []
    for k in range(count):
        s = (k + 0.5) * step
        if s < width:
            x, y = s, -offset
        elif s < width + height:
            x, y = width + offset, s - width
        elif s < 2 * width + height:
            x, y = width - (s - width - height), height + offset
        else:
            x, y = -offset, height - (s - 2 * width - height)
        nodes.append((origin[0] + x, origin[1] + y))
    logger.debug(f"Placed {count} perimeter nodes on {width:.2f} x {height:.2f} m")
    return nodes
