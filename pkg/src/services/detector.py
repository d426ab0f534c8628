"""
Detector Service.

Per-link binary hypothesis test. A link decides presence (H1) when the
magnitude of its centered observation exceeds the lower-envelope threshold
Z = |zeta_l(Delta_t)|; the channels of one transmitter-receiver pair are fused
by strict majority.
"""

import logging
from collections import deque
from typing import Iterable, Sequence

import numpy as np

from src.models.channel import ReflectionParams
from src.models.common import RTIError
from src.models.deployment import Deployment
from src.models.detection import DetectorConfig
from src.services.channel import envelope_pair

logger = logging.getLogger(__name__)

# The envelopes do not depend on the carrier, any in-band value will do
_NOMINAL_FREQUENCY = 2.4425e9


class DetectorError(RTIError, ValueError):
    """Invalid detector input."""


def compute_threshold(link_d: float, gamma: float, eta: float, max_excess_path: float) -> float:
    """
    Detection threshold Z in dB for a link of length link_d.

    Z = |lower envelope at Delta_t|; the lower envelope always dominates the upper one.
    """
    if not 0.0 <= gamma < 1.0:
        raise DetectorError(f"reflection coefficient must be in [0, 1), got {gamma}")
    if link_d <= 0:
        raise DetectorError(f"link length must be positive, got {link_d}")
    params = ReflectionParams(gamma=gamma, eta=eta, distance=link_d, frequency=_NOMINAL_FREQUENCY)
    upper, lower = envelope_pair(max_excess_path, params)
    threshold = abs(lower)
    assert threshold == max(abs(upper), abs(lower))
    return threshold


def decide(z: float, threshold: float) -> int:
    """1 (H1) iff |z| > Z; equality stays with H0."""
    if threshold < 0:
        raise DetectorError(f"threshold must be non-negative, got {threshold}")
    return 1 if abs(z) > threshold else 0


def majority_vote(channel_decisions: Sequence[int]) -> int:
    """1 iff strictly more than half the channels detect; ties are non-detections."""
    if len(channel_decisions) == 0:
        raise DetectorError("majority vote over no channels")
    return 1 if 2 * sum(channel_decisions) > len(channel_decisions) else 0


def thresholds_for_deployment(
    deployment: Deployment,
    gamma: float,
    eta: float,
    max_excess_path: float,
) -> DetectorConfig:
    """Thresholds for every link of a deployment; links of one pair share a value."""
    pair_thresholds = [
        compute_threshold(float(d), gamma, eta, max_excess_path) for d in deployment.pair_lengths
    ]
    thresholds = [pair_thresholds[int(p)] for p in deployment.link_pair_ids]
    logger.debug(
        f"Thresholds for {deployment.link_count} links: "
        f"{min(thresholds):.3f}..{max(thresholds):.3f} dB"
    )
    return DetectorConfig(max_excess_path=max_excess_path, thresholds=thresholds)


class LinkDetector:
    """
    Stateful detector of one link.

    Observations are averaged over the last `window` values before the
    threshold test; window 1 uses the raw observation.
    """

    def __init__(self, threshold: float, window: int = 1):
        if window < 1:
            raise DetectorError("smoothing window must be at least 1")
        if threshold < 0:
            raise DetectorError("threshold must be non-negative")
        self.threshold = threshold
        self.window = window
        self._recent: deque[float] = deque(maxlen=window)
        self.last_decision = 0

    def observe(self, z: float) -> int:
        """Push one centered observation and return the current decision."""
        self._recent.append(z)
        value = z if self.window == 1 else sum(self._recent) / len(self._recent)
        self.last_decision = decide(value, self.threshold)
        return self.last_decision

    def reset(self) -> None:
        self._recent.clear()
        self.last_decision = 0


def fuse_pairs(link_decisions: np.ndarray, deployment: Deployment) -> np.ndarray:
    """Pair-level decisions from per-link decisions by strict channel majority."""
    pair_ids = deployment.link_pair_ids
    pair_count = len(deployment.pairs)
    hits = np.bincount(pair_ids, weights=np.asarray(link_decisions, dtype=float), minlength=pair_count)
    channels = np.bincount(pair_ids, minlength=pair_count)
    return (2 * hits > channels).astype(np.uint8)


def pack_detections(bits: Iterable[int]) -> bytes:
    """One bit per pair, pair-id order, little-endian within each byte."""
    array = np.asarray(list(bits), dtype=np.uint8)
    if np.any(array > 1):
        raise DetectorError("detections must be 0 or 1")
    return np.packbits(array, bitorder="little").tobytes()


def unpack_detections(data: bytes, count: int) -> np.ndarray:
    """Inverse of pack_detections for `count` pairs."""
    if len(data) * 8 < count:
        raise DetectorError(f"{len(data)} bytes cannot hold {count} detections")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count, bitorder="little")
