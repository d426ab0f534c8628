"""
Propagation model parameters.

Reflection parameters feed the single-bounce reflection model; path-loss
parameters feed the log-distance line-of-sight power model.
"""

from pydantic import BaseModel, ConfigDict, Field


class ReflectionParams(BaseModel):
    """Parameters of the single-bounce reflection model for one link."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., ge=0.0, lt=1.0, description="Reflection coefficient")
    eta: float = Field(..., gt=0.0, description="Path-loss exponent")
    distance: float = Field(..., gt=0.0, description="Link length d in meters")
    frequency: float = Field(..., gt=0.0, description="Carrier frequency in Hz")


class PathLossParams(BaseModel):
    """Log-distance path-loss model parameters."""

    model_config = ConfigDict(frozen=True)

    transmit_power_dbm: float = Field(..., description="Transmit power P_s in dBm")
    reference_power_db: float = Field(..., description="Loss P_1 at the reference distance in dB")
    reference_distance: float = Field(default=1.0, gt=0.0, description="Reference distance d_1 in m")
    eta: float = Field(..., gt=0.0, description="Path-loss exponent")
