"""
Detector and classifier models.

DetectorConfig carries the per-link observation thresholds, Blacklist the
per-pair classifier output, and CalibrationSet/CalibrationResult the
vacant-environment calibration inputs and products.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DetectorConfig(BaseModel):
    """Maximum excess path length and the resulting per-link thresholds."""

    model_config = ConfigDict(frozen=True)

    max_excess_path: float = Field(..., gt=0.0, description="Delta_t in meters")
    thresholds: list[float] = Field(..., description="Threshold Z per link id in dB")

    @model_validator(mode="after")
    def _non_negative(self) -> "DetectorConfig":
        if any(z < 0 for z in self.thresholds):
            raise ValueError("thresholds must be non-negative")
        return self


class Blacklist(BaseModel):
    """Classifier output per transmitter-receiver pair: 1 = usable, 0 = blacklisted."""

    model_config = ConfigDict(frozen=True)

    usable: list[int]

    @model_validator(mode="after")
    def _binary(self) -> "Blacklist":
        if any(v not in (0, 1) for v in self.usable):
            raise ValueError("blacklist entries must be 0 or 1")
        return self

    @classmethod
    def all_usable(cls, count: int) -> "Blacklist":
        return cls(usable=[1] * count)

    def __len__(self) -> int:
        return len(self.usable)

    @property
    def blacklisted(self) -> list[int]:
        return [i for i, v in enumerate(self.usable) if v == 0]


class CalibrationSet(BaseModel):
    """Vacant-environment line-of-sight power estimates for every link."""

    model_config = ConfigDict(frozen=True)

    los_power: list[float] = Field(..., description="Estimated P_0 per link id in dBm")
    distances: list[float] = Field(..., description="Link length per link id in meters")
    channels: list[int] = Field(..., description="Channel id per link id")
    transmit_power_dbm: float
    reference_distance: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _aligned(self) -> "CalibrationSet":
        n = len(self.los_power)
        if len(self.distances) != n or len(self.channels) != n:
            raise ValueError("los_power, distances and channels must have equal length")
        if any(p != p or p in (float("inf"), float("-inf")) for p in self.los_power):
            raise ValueError("every line-of-sight power estimate must be finite")
        if any(d <= 0 for d in self.distances):
            raise ValueError("link distances must be positive")
        return self


class PathLossFit(BaseModel):
    """Least-squares estimate of the shared exponent and per-channel reference power."""

    model_config = ConfigDict(frozen=True)

    eta: float
    reference_power_db: dict[int, float]
    residual_norm: float = 0.0


class CalibrationResult(BaseModel):
    """Everything the per-frame pipeline needs from the calibration period."""

    model_config = ConfigDict(frozen=True)

    fit: PathLossFit
    los_power: list[float] = Field(..., description="P_0 per link id")
    fade_levels: list[float] = Field(..., description="Fade level per link id")
    link_usable: list[int] = Field(..., description="Per link-channel blacklist flag")
    blacklist: Blacklist
    fade_threshold_db: float
    transmit_power_dbm: Optional[float] = None
