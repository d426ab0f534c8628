"""
Power-measurement noise model.
"""

from pydantic import BaseModel, ConfigDict, Field

# K >= 512 for IEEE 802.15.4 receivers (32 chips x 8 symbols x 2 for Nyquist)
DEFAULT_SAMPLES = 512


class NoiseModel(BaseModel):
    """
    Noise of a digitally computed received-power measurement.

    The power is averaged over K complex samples of white Gaussian noise with
    per-quadrature variance sigma2, so the noise power sum is gamma distributed.
    """

    model_config = ConfigDict(frozen=True)

    sigma2: float = Field(..., gt=0.0, description="Per-quadrature noise variance (linear)")
    samples: int = Field(default=DEFAULT_SAMPLES, ge=1, description="Sample count K")
    quantization_step: float = Field(default=1.0, ge=0.0, description="RSS step in dB, 0 = none")
