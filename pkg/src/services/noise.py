"""
Noise Service.

Statistics of the digitally computed received-power noise. The noise power
averaged over K complex Gaussian samples, S_K, is gamma distributed with
shape K and scale 2 sigma^2 / K; it tends to N(2 sigma^2, 4 sigma^4 / K) with a
Berry-Esseen distance that shrinks as 1/sqrt(K).

Sampling takes an explicit numpy Generator (or a seed) so callers own their
random streams.
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy import special, stats

from src.models.common import RTIError
from src.models.noise import NoiseModel

logger = logging.getLogger(__name__)

# Berry-Esseen constant for sums of unit-shape gamma variates
BERRY_ESSEEN_UNIT_SHAPE = 0.8103291
# Constants of the non-uniform-moment form of the Berry-Esseen inequality
_BE_SCALE = 0.33554
_BE_OFFSET = 0.415

RandomSource = Union[np.random.Generator, int, None]


class NoiseError(RTIError, ValueError):
    """Invalid noise model input."""


def as_generator(rng: RandomSource) -> np.random.Generator:
    """Accept a Generator or a seed and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def gamma_raw_moment(shape: float, scale: float, r: int) -> float:
    """r-th non-central moment of a gamma(shape, scale) variate: scale^r Gamma(shape+r)/Gamma(shape)."""
    if shape <= 0 or scale <= 0:
        raise NoiseError(f"gamma shape and scale must be positive, got ({shape}, {scale})")
    if r < 0:
        raise NoiseError(f"moment order must be non-negative, got {r}")
    return float(scale**r * special.poch(shape, r))


def gamma_central_moments(shape: float, scale: float) -> tuple[float, float]:
    """Second and third central moments of a gamma variate from its raw moments."""
    m1 = gamma_raw_moment(shape, scale, 1)
    m2 = gamma_raw_moment(shape, scale, 2)
    m3 = gamma_raw_moment(shape, scale, 3)
    mu2 = m2 - m1 * m1
    mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1**3
    return mu2, mu3


def berry_esseen_bound_from_moments(shape: float, scale: float, samples: int) -> float:
    """
    Berry-Esseen distance bound for the mean of `samples` i.i.d. gamma variates.

    0.33554 (mu3 + 0.415 mu2^(3/2)) / (mu2^(3/2) sqrt(K))
    """
    if samples < 1:
        raise NoiseError("sample count must be at least 1")
    mu2, mu3 = gamma_central_moments(shape, scale)
    mu2_32 = mu2 * math.sqrt(mu2)
    return _BE_SCALE * (mu3 + _BE_OFFSET * mu2_32) / (mu2_32 * math.sqrt(samples))


def berry_esseen_bound(samples: int) -> float:
    """Berry-Esseen bound on |F_{S_K} - Phi| for the noise power sum: 0.8103291 / sqrt(K)."""
    if samples < 1:
        raise NoiseError("sample count must be at least 1")
    return BERRY_ESSEEN_UNIT_SHAPE / math.sqrt(samples)


def sample_power_sum(model: NoiseModel, rng: RandomSource = None) -> float:
    """One draw of S_K ~ gamma(K, 2 sigma^2 / K)."""
    gen = as_generator(rng)
    return float(gen.gamma(shape=model.samples, scale=2.0 * model.sigma2 / model.samples))


def sample_power_sums(model: NoiseModel, size: int, rng: RandomSource = None) -> np.ndarray:
    """`size` independent draws of S_K."""
    gen = as_generator(rng)
    return gen.gamma(shape=model.samples, scale=2.0 * model.sigma2 / model.samples, size=size)


def standardized_cdf_distance(draws: np.ndarray, samples: int, sigma2: float) -> float:
    """
    Sup-distance between the empirical CDF of standardized S_K draws and Phi.

    Draws are standardized with the limiting mean 2 sigma^2 and standard
    deviation 2 sigma^2 / sqrt(K).
    """
    z = np.sort((np.asarray(draws, dtype=float) - 2.0 * sigma2) / (2.0 * sigma2 / math.sqrt(samples)))
    n = z.size
    if n == 0:
        raise NoiseError("no draws to compare")
    cdf = stats.norm.cdf(z)
    d_plus = np.max(np.arange(1, n + 1) / n - cdf)
    d_minus = np.max(cdf - np.arange(0, n) / n)
    return float(max(d_plus, d_minus))


def asymptotic_noise_mean(snr_los: float, zeta_db: float) -> float:
    """
    Limit of the noise term in dB as K grows.

    10 log10(1 + (2 / SNR_LoS) 10^(-zeta/10))
    """
    if snr_los <= 0:
        raise NoiseError(f"LoS SNR must be positive, got {snr_los}")
    if math.isinf(snr_los):
        return 0.0
    return 10.0 * math.log10(1.0 + (2.0 / snr_los) * 10.0 ** (-zeta_db / 10.0))


def measurement_noise_db(model: NoiseModel, p_c: float, rng: RandomSource = None) -> float:
    """
    Noise term of one RSS measurement in dB: 10 log10(1 + S_K / P_c).

    P_c is the noise-free received power in linear units.
    """
    if p_c <= 0:
        raise NoiseError(f"received power must be positive, got {p_c}")
    return 10.0 * math.log10(1.0 + sample_power_sum(model, rng) / p_c)


def sigma2_from_snr(p0_linear: float | np.ndarray, snr_db: float) -> float | np.ndarray:
    """Per-quadrature noise variance that gives the LoS power the requested SNR P_0/sigma^2."""
    return np.asarray(p0_linear, dtype=float) / 10.0 ** (snr_db / 10.0)


def quantize(value: float | np.ndarray, step: float) -> float | np.ndarray:
    """Round to a multiple of `step`, halves away from zero; step 0 leaves the value as is."""
    if step <= 0:
        return value
    x = np.asarray(value, dtype=float) / step
    q = np.sign(x) * np.floor(np.abs(x) + 0.5) * step
    return float(q) if np.ndim(q) == 0 else q


def heavy_tail_noise(scale_db: float, rng: RandomSource = None, size: Optional[int] = None):
    """Synthetic Student-t (3 degrees of freedom) noise in dB; zero scale disables it."""
    if scale_db <= 0:
        return 0.0 if size is None else np.zeros(size)
    gen = as_generator(rng)
    return scale_db * gen.standard_t(3, size=size)
