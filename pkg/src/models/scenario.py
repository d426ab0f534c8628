"""
Scenario configuration and per-frame records.

ScenarioConfig mirrors the `[section]` / `key = value` scenario file: one
nested model per section, unknown keys rejected. Values arrive as strings
from the file, so list-valued keys accept comma separated numbers and point
lists accept `x y; x y; ...`.
"""

from enum import Enum
from typing import Annotated, Any, Literal, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from src.models.common import Point


def _split_numbers(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.replace(";", ",").split(",") if item.strip()]
    return value


def _split_points(value: Any) -> Any:
    if isinstance(value, str):
        points = []
        for chunk in value.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"point '{chunk}' must have exactly two coordinates")
            points.append((parts[0], parts[1]))
        return points
    return value


IntList = Annotated[list[int], BeforeValidator(_split_numbers)]
FloatList = Annotated[list[float], BeforeValidator(_split_numbers)]
PointList = Annotated[list[Point], BeforeValidator(_split_points)]


class Section(BaseModel):
    """Base for config sections: unknown keys are errors, assignments re-validated."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ScenarioSection(Section):
    name: str = "scenario"
    seed: int = Field(default=0, ge=0, lt=2**64)
    frame_interval_s: float = Field(default=0.005, gt=0.0)
    calibration_s: float = Field(default=5.0, gt=0.0)


class GridSection(Section):
    pixel_size_m: float = Field(default=0.0625, gt=0.0)
    width_m: float = Field(default=7.0, gt=0.0)
    height_m: float = Field(default=6.0, gt=0.0)
    origin_x: float = 0.0
    origin_y: float = 0.0


class DeploymentSection(Section):
    layout: Literal["perimeter", "explicit"] = "perimeter"
    node_count: int = Field(default=16, ge=2)
    node_offset_m: float = Field(default=0.0, ge=0.0, description="Distance outside the area")
    nodes: PointList = Field(default_factory=list)
    channels: IntList = Field(default_factory=lambda: [11, 18, 26], min_length=1)

    @model_validator(mode="after")
    def _explicit_nodes(self) -> "DeploymentSection":
        if self.layout == "explicit" and len(self.nodes) < 2:
            raise ValueError("explicit layout needs at least two nodes")
        return self


class ModelSection(Section):
    gamma: float = Field(default=0.5, ge=0.0, lt=1.0)
    path_loss_exponent: float = Field(default=2.0, gt=0.0)
    transmit_power_dbm: float = 0.0
    reference_power_db: float = 40.0
    reference_distance_m: float = Field(default=1.0, gt=0.0)
    channel_offsets_db: FloatList = Field(default_factory=list)
    crossing_attenuation_db: float = Field(default=0.0, ge=0.0)


class NoiseSection(Section):
    snr_db: float = 25.0
    samples: int = Field(default=512, ge=1)
    quantization_step_db: float = Field(default=1.0, ge=0.0)
    heavy_tail_db: float = Field(default=0.0, ge=0.0)


class ObjectShape(str, Enum):
    POINT = "point"
    CIRCLE = "circle"


class ObjectSection(Section):
    shape: ObjectShape = ObjectShape.CIRCLE
    radius_m: float = Field(default=0.1575, gt=0.0)


class TrajectoryKind(str, Enum):
    WAYPOINTS = "waypoints"
    RANDOM_WALK = "random_walk"
    STANDSTILL = "standstill"
    VACANT = "vacant"


class TrajectorySection(Section):
    kind: TrajectoryKind = TrajectoryKind.RANDOM_WALK
    frames: int = Field(default=5000, ge=0)
    speed_mps: float = Field(default=0.3, gt=0.0)
    margin_m: float = Field(default=0.5, ge=0.0)
    waypoints: PointList = Field(default_factory=list)
    loop: bool = True
    points: PointList = Field(default_factory=list)
    dwell_s: float = Field(default=5.0, gt=0.0)

    @model_validator(mode="after")
    def _kind_inputs(self) -> "TrajectorySection":
        if self.kind == TrajectoryKind.WAYPOINTS and len(self.waypoints) < 1:
            raise ValueError("waypoints trajectory needs at least one waypoint")
        if self.kind == TrajectoryKind.STANDSTILL and len(self.points) < 1:
            raise ValueError("standstill trajectory needs at least one point")
        return self


class DetectorSection(Section):
    max_excess_path_m: float = Field(default=0.15625, gt=0.0)
    smoothing_window: int = Field(default=1, ge=1)


class ClassifierSection(Section):
    fade_threshold_db: float = Field(default=-20.0, lt=0.0)
    los_estimator: Literal["mean", "mode"] = "mean"
    single_frame: bool = False


class ReconstructionSection(Section):
    scale_mode: Literal["count", "area"] = "count"
    regions: int = Field(default=1, ge=1)


class EstimatorSection(Section):
    threshold_scale: float = Field(default=0.75, gt=0.0, lt=1.0)


class OutputSection(Section):
    snapshot_interval: int = Field(default=0, ge=0, description="Frames between PGM snapshots")
    bitstream: bool = True


class ScenarioConfig(BaseModel):
    """Full parameterization of a synthetic experiment."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    grid: GridSection = Field(default_factory=GridSection)
    deployment: DeploymentSection = Field(default_factory=DeploymentSection)
    model: ModelSection = Field(default_factory=ModelSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    object: ObjectSection = Field(default_factory=ObjectSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    detector: DetectorSection = Field(default_factory=DetectorSection)
    classifier: ClassifierSection = Field(default_factory=ClassifierSection)
    reconstruction: ReconstructionSection = Field(default_factory=ReconstructionSection)
    estimator: EstimatorSection = Field(default_factory=EstimatorSection)
    output: OutputSection = Field(default_factory=OutputSection)
    fades: dict[int, float] = Field(default_factory=dict, description="Link id -> offset dB")

    @model_validator(mode="after")
    def _cross_section(self) -> "ScenarioConfig":
        offsets = self.model.channel_offsets_db
        if offsets and len(offsets) != len(self.deployment.channels):
            raise ValueError("model.channel_offsets_db must list one offset per channel")
        return self


class FrameRecord(BaseModel):
    """One received measurement: a single link on a single channel."""

    model_config = ConfigDict(frozen=True)

    frame: int = Field(..., ge=0)
    time_s: float
    link: int = Field(..., ge=0)
    channel: int
    rss_db: float
    true_position: Optional[Point] = None


class EstimateRecord(BaseModel):
    """Per-frame localization output."""

    model_config = ConfigDict(frozen=True)

    frame: int
    time_s: float
    true_position: Optional[Point] = None
    estimate: Optional[Point] = None
    error_m: Optional[float] = None
    support_pixels: int = 0
    detecting_links: int = 0

    @property
    def status(self) -> str:
        return "ok" if self.estimate is not None else "no_occupancy"
