"""
Distance-error statistics models.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class Distribution(str, Enum):
    """Distribution families tested against the distance errors."""

    RAYLEIGH = "rayleigh"
    GAMMA = "gamma"
    LOGNORMAL = "lognormal"


class ErrorStats(BaseModel):
    """First two moments and skewness of the distance errors."""

    mean: float
    variance: float = Field(..., ge=0.0)
    skewness: Optional[float] = None
    count: int = Field(..., ge=1)


class FitResult(BaseModel):
    """Maximum-likelihood fit of one family, with its goodness-of-fit test."""

    family: Distribution
    params: dict[str, float]
    statistic: Optional[float] = None
    p_value: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    h_value: Optional[int] = None
    significance: float = 0.05
    bootstrap: bool = False


class HistogramBin(BaseModel):
    """One histogram bin with the fitted density at its center."""

    left: float
    right: float
    count: int
    fitted_density: Optional[float] = None


class ReferenceResult(BaseModel):
    """Mean error reported for a comparison method."""

    experiment: str
    method: str
    mean_error: float
