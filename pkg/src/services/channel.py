"""
Channel Service.

Single-bounce reflection model of the received signal strength: the effect
of reflection on the RSS, its upper and lower envelopes, the two-term
linearization of the envelopes, and the log-distance line-of-sight power.
"""

import logging
import math

import numpy as np

from src.models.channel import PathLossParams, ReflectionParams
from src.models.common import RTIError
from src.services.geometry import SPEED_OF_LIGHT

logger = logging.getLogger(__name__)

DB_PER_NEPER_AMPLITUDE = 20.0 / math.log(10.0)


class ChannelError(RTIError, ValueError):
    """Input outside the domain of the propagation model."""


def db_to_linear(value_db: float | np.ndarray) -> float | np.ndarray:
    return np.power(10.0, np.asarray(value_db) / 10.0)


def linear_to_db(value: float | np.ndarray) -> float | np.ndarray:
    return 10.0 * np.log10(value)


def _relative_amplitude(delta: float | np.ndarray, params: ReflectionParams) -> float | np.ndarray:
    """Gamma / (1 + delta/d)^(eta/2): reflected over direct amplitude."""
    return params.gamma / np.power(1.0 + np.asarray(delta) / params.distance, params.eta / 2.0)


def _check_delta(delta: float | np.ndarray) -> None:
    if np.any(np.asarray(delta) < 0):
        raise ChannelError("excess path length must be non-negative")


def zeta(delta: float, params: ReflectionParams) -> float:
    """
    Effect of a single-bounce reflection on the RSS in dB.

    zeta = 10 log10(1 + G^2/(1+x)^eta)
         + 10 log10(1 - 2 G (1+x)^(eta/2) / (G^2 + (1+x)^eta) cos(phi)),
    x = delta/d, phi = 2 pi delta f_c / c0.
    """
    return float(zeta_array(np.asarray(delta, dtype=float), params))


def zeta_array(delta: np.ndarray, params: ReflectionParams) -> np.ndarray:
    """Vectorized zeta over an array of excess path lengths."""
    return zeta_values(delta, params.distance, params.gamma, params.eta, params.frequency)


def zeta_values(
    delta: float | np.ndarray,
    distance: float | np.ndarray,
    gamma: float,
    eta: float,
    frequency: float,
) -> np.ndarray:
    """zeta with excess path lengths and link lengths broadcast against each other."""
    _check_delta(delta)
    if not 0.0 <= gamma < 1.0:
        raise ChannelError("reflection coefficient must be in [0, 1)")
    delta = np.asarray(delta, dtype=float)
    growth = np.power(1.0 + delta / np.asarray(distance, dtype=float), eta)
    phi = 2.0 * math.pi * delta * frequency / SPEED_OF_LIGHT
    power_term = 10.0 * np.log10(1.0 + gamma * gamma / growth)
    phase_term = 10.0 * np.log10(
        1.0 - 2.0 * gamma * np.sqrt(growth) / (gamma * gamma + growth) * np.cos(phi)
    )
    return power_term + phase_term


def envelope_pair(delta: float, params: ReflectionParams) -> tuple[float, float]:
    """
    Upper and lower envelopes of zeta.

    Returns (20 log10(1 + a), 20 log10(1 - a)) with a = G / (1 + delta/d)^(eta/2).
    """
    _check_delta(delta)
    a = float(_relative_amplitude(delta, params))
    if 1.0 - a <= 0.0:
        raise ChannelError("lower envelope is undefined for a reflected amplitude >= 1")
    return 20.0 * math.log10(1.0 + a), 20.0 * math.log10(1.0 - a)


def envelope_linearized(delta: float, params: ReflectionParams) -> tuple[float, float]:
    """Two-term Maclaurin expansion of the envelopes, valid for delta << d."""
    g = params.gamma
    slope = (params.eta / 2.0) * (g / (g + 1.0)) * (delta / params.distance)
    upper = DB_PER_NEPER_AMPLITUDE * (math.log(1.0 + g) - slope)
    lower = DB_PER_NEPER_AMPLITUDE * (math.log(1.0 - g) + slope)
    return upper, lower


def envelope_relative_error(delta: float, params: ReflectionParams) -> tuple[float, float]:
    """Relative error of the linearized envelopes against the exact ones."""
    exact_u, exact_l = envelope_pair(delta, params)
    lin_u, lin_l = envelope_linearized(delta, params)
    rel_u = abs(lin_u - exact_u) / abs(exact_u) if exact_u else 0.0
    rel_l = abs(lin_l - exact_l) / abs(exact_l) if exact_l else 0.0
    return rel_u, rel_l


def los_power(params: PathLossParams, d: float | np.ndarray) -> float | np.ndarray:
    """
    Line-of-sight power predicted by the log-distance model.

    P_0 = P_s - P_1 - 10 eta log10(d / d_1)
    """
    if np.any(np.asarray(d) <= 0):
        raise ChannelError("distance must be positive")
    value = (
        params.transmit_power_dbm
        - params.reference_power_db
        - 10.0 * params.eta * np.log10(np.asarray(d, dtype=float) / params.reference_distance)
    )
    return float(value) if np.ndim(value) == 0 else value
