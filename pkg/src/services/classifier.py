"""
Classifier Service.

Calibrates the log-distance model from vacant-environment measurements and
blacklists links in deep fade. A link-channel is in deep fade when its
line-of-sight power estimate falls at least |P_d| dB below the model
prediction; a transmitter-receiver pair is dropped when most of its channels
are.
"""

import logging
from typing import Literal, Sequence

import numpy as np

from src.models.channel import PathLossParams
from src.models.common import RTIError
from src.models.deployment import Deployment
from src.models.detection import Blacklist, CalibrationResult, CalibrationSet, PathLossFit
from src.services.channel import los_power
from src.services.noise import quantize

logger = logging.getLogger(__name__)

LosEstimator = Literal["mean", "mode"]


class CalibrationError(RTIError, ValueError):
    """Calibration data cannot support the requested fit or classification."""


def fade_level(los_estimate: float, predicted: float) -> float:
    """Deviation of the estimated LoS power from the model prediction in dB."""
    return los_estimate - predicted


def blacklist(fade: float, fade_threshold: float) -> int:
    """0 (blacklisted) when fade <= P_d, else 1."""
    if fade_threshold >= 0:
        raise CalibrationError(f"fade threshold must be negative, got {fade_threshold}")
    return 0 if fade <= fade_threshold else 1


def channel_majority_blacklist(channel_flags: Sequence[int]) -> int:
    """Pair flag: 0 iff strictly more than half the channels are blacklisted; ties keep the pair."""
    if len(channel_flags) == 0:
        raise CalibrationError("no channel flags to combine")
    bad = sum(1 for flag in channel_flags if flag == 0)
    return 0 if 2 * bad > len(channel_flags) else 1


def fit_path_loss(cal: CalibrationSet) -> PathLossFit:
    """
    Least-squares fit of a shared path-loss exponent and per-channel reference loss.

    Solves P0_hat - P_s = -P_1(channel) - 10 eta log10(d / d_1) over all links.
    """
    distances = np.asarray(cal.distances, dtype=float)
    if np.unique(distances).size < 2:
        raise CalibrationError("path-loss fit needs at least two distinct link distances")

    channels = list(dict.fromkeys(cal.channels))
    column = {c: i + 1 for i, c in enumerate(channels)}
    design = np.zeros((len(distances), len(channels) + 1))
    design[:, 0] = -10.0 * np.log10(distances / cal.reference_distance)
    for row, channel in enumerate(cal.channels):
        design[row, column[channel]] = -1.0
    target = np.asarray(cal.los_power, dtype=float) - cal.transmit_power_dbm

    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise CalibrationError(
            "path-loss fit is rank deficient",
            detail=f"rank {rank} < {design.shape[1]} unknowns",
        )
    solution, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.linalg.norm(design @ solution - target))

    fit = PathLossFit(
        eta=float(solution[0]),
        reference_power_db={c: float(solution[column[c]]) for c in channels},
        residual_norm=residual,
    )
    logger.info(f"Path-loss fit: eta={fit.eta:.4f}, residual={residual:.4f} dB over {len(target)} links")
    return fit


def estimate_los_power(
    samples: Sequence[float] | np.ndarray,
    estimator: LosEstimator = "mean",
    step: float = 1.0,
) -> float:
    """
    LoS power estimate from vacant-period RSS samples.

    "mean" is the sample mean; "mode" is the most frequent value after
    quantizing to `step` dB, tied modes averaged.
    """
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise CalibrationError("no calibration samples")
    if estimator == "mean":
        return float(values.mean())
    if estimator == "mode":
        levels, counts = np.unique(quantize(values, step) if step > 0 else values, return_counts=True)
        return float(levels[counts == counts.max()].mean())
    raise CalibrationError(f"unknown LoS estimator '{estimator}'")


def predicted_los_power(cal: CalibrationSet, fit: PathLossFit) -> np.ndarray:
    """Model prediction for every link of the calibration set."""
    predicted = np.empty(len(cal.los_power))
    for i, (d, channel) in enumerate(zip(cal.distances, cal.channels)):
        params = PathLossParams(
            transmit_power_dbm=cal.transmit_power_dbm,
            reference_power_db=fit.reference_power_db[channel],
            reference_distance=cal.reference_distance,
            eta=fit.eta,
        )
        predicted[i] = los_power(params, d)
    return predicted


def classify_links(
    cal: CalibrationSet,
    fit: PathLossFit,
    fade_threshold: float,
    deployment: Deployment,
) -> CalibrationResult:
    """Fade levels, per-link flags and the pair blacklist."""
    if len(cal.los_power) != deployment.link_count:
        raise CalibrationError(
            f"calibration covers {len(cal.los_power)} links, deployment has {deployment.link_count}"
        )
    predicted = predicted_los_power(cal, fit)
    fades = [fade_level(p, q) for p, q in zip(cal.los_power, predicted)]
    link_usable = [blacklist(f, fade_threshold) for f in fades]
    pair_usable = [
        channel_majority_blacklist([link_usable[l] for l in links]) for links in deployment.pair_links
    ]
    result = CalibrationResult(
        fit=fit,
        los_power=list(cal.los_power),
        fade_levels=fades,
        link_usable=link_usable,
        blacklist=Blacklist(usable=pair_usable),
        fade_threshold_db=fade_threshold,
        transmit_power_dbm=cal.transmit_power_dbm,
    )
    dropped = result.blacklist.blacklisted
    if dropped:
        logger.warning(f"Blacklisted {len(dropped)} of {len(pair_usable)} pairs in deep fade")
    return result


def calibrate(cal: CalibrationSet, deployment: Deployment, fade_threshold: float) -> CalibrationResult:
    """Fit the path-loss model and classify every link."""
    return classify_links(cal, fit_path_loss(cal), fade_threshold, deployment)
