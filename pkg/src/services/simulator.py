"""
Simulator Service.

Synthetic experiment engine. Nodes broadcast in round-robin over
(channel, transmitter); every other node receives the broadcast, producing
one RSS measurement per directed link. Each measurement is the log-distance
line-of-sight power plus the reflection effect of the object, plus the
power-measurement noise, then quantized.

All randomness derives from the scenario seed through numpy SeedSequence
spawn keys (stream, index): stream 0 is the noise of link `index`, stream 1
the trajectory, stream 2 the heavy-tail noise of link `index`.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.models.channel import PathLossParams
from src.models.common import Point, RTIError
from src.models.deployment import Deployment, Grid
from src.models.detection import CalibrationResult, CalibrationSet, DetectorConfig
from src.models.field import OccupancyField
from src.models.noise import NoiseModel
from src.models.scenario import (
    EstimateRecord,
    FrameRecord,
    ObjectShape,
    ScenarioConfig,
    TrajectoryKind,
)
from src.services.channel import db_to_linear, los_power, zeta_values
from src.services.classifier import calibrate, estimate_los_power
from src.services.noise import heavy_tail_noise, measurement_noise_db, quantize, sigma2_from_snr
from src.services.pipeline import LocalizationPipeline
from src.services.reconstruction import OperationCounter
from src.services.scenario_io import build_deployment, build_grid

logger = logging.getLogger(__name__)

NOISE_STREAM = 0
TRAJECTORY_STREAM = 1
HEAVY_TAIL_STREAM = 2

# Coarse angular search before the golden-section refinement
_ANGLE_SAMPLES = 256
_REFLECTION_TOLERANCE = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# Random headings drawn before a random-walk step is skipped
_HEADING_TRIES = 100


class SimulationError(RTIError, ValueError):
    """The scenario cannot be simulated as configured."""


def random_stream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (stream, index) under the scenario seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


# =============================================================================
# Reflection geometry
# =============================================================================


def _segment_foot(center: np.ndarray, p_t: np.ndarray, p_r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest point of each segment p_t -> p_r to `center` and its distance."""
    u = p_r - p_t
    t = np.clip(((center - p_t) * u).sum(axis=-1) / (u * u).sum(axis=-1), 0.0, 1.0)
    foot = p_t + t[..., None] * u
    return foot, np.linalg.norm(center - foot, axis=-1)


def reflection_points(
    center: Point | np.ndarray,
    radius: float,
    p_t: Point | np.ndarray,
    p_r: np.ndarray,
) -> np.ndarray:
    """
    Specular points on a circle for one transmitter and several receivers.

    The specular point minimizes |q - p_t| + |q - p_r| over the circle. When
    the link segment cuts the circle any crossing point is a minimizer and
    the one nearest the transmitter is returned.
    """
    c = np.asarray(center, dtype=float)
    p_t = np.asarray(p_t, dtype=float)
    p_r = np.atleast_2d(np.asarray(p_r, dtype=float))
    if np.linalg.norm(p_t - c) <= radius or np.any(np.linalg.norm(p_r - c, axis=1) <= radius):
        raise SimulationError("a node lies inside the object")

    result = np.empty_like(p_r)
    foot, dist = _segment_foot(c, p_t, p_r)
    crossing = dist <= radius
    if np.any(crossing):
        u = p_r[crossing] - p_t
        u /= np.linalg.norm(u, axis=1)[:, None]
        half_chord = np.sqrt(radius * radius - dist[crossing] ** 2)
        result[crossing] = foot[crossing] - half_chord[:, None] * u

    clear = ~crossing
    if np.any(clear):
        receivers = p_r[clear]

        def path(theta: np.ndarray) -> np.ndarray:
            q = c + radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            return np.linalg.norm(q - p_t, axis=-1) + np.linalg.norm(q - receivers, axis=-1)

        step = 2.0 * math.pi / _ANGLE_SAMPLES
        grid = np.arange(_ANGLE_SAMPLES) * step
        q_grid = c + radius * np.stack([np.cos(grid), np.sin(grid)], axis=-1)
        lengths = np.linalg.norm(q_grid - p_t, axis=-1)[None, :] + np.linalg.norm(
            q_grid[None, :, :] - receivers[:, None, :], axis=-1
        )
        best = grid[np.argmin(lengths, axis=1)]
        lo, hi = best - step, best + step
        # bracket width times radius is the arc length still in doubt
        iterations = math.ceil(math.log(2.0 * step * radius / _REFLECTION_TOLERANCE) / -math.log(_GOLDEN))
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = path(x1), path(x2)
        for _ in range(max(iterations, 1)):
            left = f1 < f2
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            x1, x2 = (
                np.where(left, hi - _GOLDEN * (hi - lo), x2),
                np.where(left, x1, lo + _GOLDEN * (hi - lo)),
            )
            f1, f2 = path(x1), path(x2)
        theta = 0.5 * (lo + hi)
        result[clear] = c + radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return result


def reflection_point(
    object_pos: Point | np.ndarray,
    shape: ObjectShape,
    p_t: Point | np.ndarray,
    p_r: Point | np.ndarray,
    radius: float = 0.0,
) -> np.ndarray:
    """Reflection point of one link: the object itself, or the specular point on its circle."""
    if shape == ObjectShape.POINT:
        return np.asarray(object_pos, dtype=float)
    return reflection_points(object_pos, radius, p_t, np.atleast_2d(np.asarray(p_r, dtype=float)))[0]


# =============================================================================
# Trajectories
# =============================================================================


def waypoint_positions(
    waypoints: Sequence[Point],
    speed: float,
    frame_interval: float,
    frames: int,
    loop: bool = True,
) -> np.ndarray:
    """Constant-speed motion along a polyline, closed when `loop` is set."""
    points = np.asarray(waypoints, dtype=float)
    if loop and len(points) > 1:
        points = np.vstack([points, points[:1]])
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    if arc[-1] == 0.0:
        # coincident waypoints: the object stands still
        return np.repeat(points[:1], frames, axis=0)
    s = speed * frame_interval * np.arange(frames)
    s = np.mod(s, arc[-1]) if loop else np.minimum(s, arc[-1])
    return np.column_stack([np.interp(s, arc, points[:, 0]), np.interp(s, arc, points[:, 1])])


def random_walk_positions(
    bounds: tuple[float, float, float, float],
    speed: float,
    frame_interval: float,
    frames: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Straight-line walk from the center of `bounds`; a new random heading is
    drawn whenever the next step would leave (xmin, ymin, xmax, ymax).
    """
    xmin, ymin, xmax, ymax = bounds
    if xmin > xmax or ymin > ymax:
        raise SimulationError("random walk margin leaves no room to move")
    pos = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
    step = speed * frame_interval
    if step > math.hypot(xmax - xmin, ymax - ymin):
        raise SimulationError(
            "random walk step does not fit inside the walking area",
            detail=f"step {step:.4g} m per frame",
        )
    heading = rng.uniform(0.0, 2.0 * math.pi)
    out = np.empty((frames, 2))
    stalled = 0
    for k in range(frames):
        out[k] = pos
        for _ in range(_HEADING_TRIES):
            nxt = pos + step * np.array([math.cos(heading), math.sin(heading)])
            if xmin <= nxt[0] <= xmax and ymin <= nxt[1] <= ymax:
                pos = nxt
                break
            heading = rng.uniform(0.0, 2.0 * math.pi)
        else:
            stalled += 1
    if stalled:
        logger.warning(f"Random walk found no heading inside the area on {stalled} of {frames} frames")
    return out


def standstill_positions(
    points: Sequence[Point], dwell: float, frame_interval: float, frames: int
) -> np.ndarray:
    """Stand at each point for `dwell` seconds in turn, cycling."""
    pts = np.asarray(points, dtype=float)
    index = np.floor(np.arange(frames) * frame_interval / dwell).astype(np.int64) % len(pts)
    return pts[index]


def trajectory_positions(config: ScenarioConfig) -> Optional[np.ndarray]:
    """Object position per trajectory frame, or None when the area stays vacant."""
    t = config.trajectory
    dt = config.scenario.frame_interval_s
    if t.kind == TrajectoryKind.VACANT:
        return None
    if t.kind == TrajectoryKind.WAYPOINTS:
        return waypoint_positions(t.waypoints, t.speed_mps, dt, t.frames, t.loop)
    if t.kind == TrajectoryKind.STANDSTILL:
        return standstill_positions(t.points, t.dwell_s, dt, t.frames)
    g = config.grid
    bounds = (
        g.origin_x + t.margin_m,
        g.origin_y + t.margin_m,
        g.origin_x + g.width_m - t.margin_m,
        g.origin_y + g.height_m - t.margin_m,
    )
    rng = random_stream(config.scenario.seed, TRAJECTORY_STREAM)
    return random_walk_positions(bounds, t.speed_mps, dt, t.frames, rng)


# =============================================================================
# Schedule and RSS synthesis
# =============================================================================


class Schedule:
    """Round-robin over (channel, transmitter): all transmitters on a channel, then the next channel."""

    def __init__(self, deployment: Deployment):
        self.deployment = deployment
        self.slots = [
            (channel, tx) for channel in deployment.channels for tx in range(deployment.node_count)
        ]
        self._receivers: dict[tuple[int, int], tuple[list[int], list[int]]] = {}
        for link_id, link in enumerate(deployment.links):
            rx, links = self._receivers.setdefault((link.channel, link.tx), ([], []))
            rx.append(link.rx)
            links.append(link_id)
        # transmitters with no links on a channel never broadcast there
        self.slots = [slot for slot in self.slots if slot in self._receivers]

    @property
    def cycle_length(self) -> int:
        return len(self.slots)

    def slot(self, frame: int) -> tuple[int, int]:
        """(channel, tx) broadcasting in a frame."""
        return self.slots[frame % len(self.slots)]

    def receivers(self, channel: int, tx: int) -> tuple[list[int], list[int]]:
        """Receiving node ids and the corresponding link ids."""
        return self._receivers[(channel, tx)]


class Simulator:
    """RSS synthesis for one scenario."""

    def __init__(self, config: ScenarioConfig, deployment: Deployment):
        self.config = config
        self.deployment = deployment
        self.schedule = Schedule(deployment)
        m = config.model
        channels = list(config.deployment.channels)
        offsets = m.channel_offsets_db or [0.0] * len(channels)
        self.channel_offset = {c: offsets[i] for i, c in enumerate(channels)}

        self.distances = deployment.link_lengths
        self.los = np.array(
            [
                los_power(
                    PathLossParams(
                        transmit_power_dbm=m.transmit_power_dbm,
                        reference_power_db=m.reference_power_db + self.channel_offset[link.channel],
                        reference_distance=m.reference_distance_m,
                        eta=m.path_loss_exponent,
                    ),
                    float(d),
                )
                for link, d in zip(deployment.links, self.distances)
            ]
        )
        for link_id in config.fades:
            if not 0 <= link_id < deployment.link_count:
                raise SimulationError(f"deep fade injected on unknown link {link_id}")
        self.fades = np.array([config.fades.get(l, 0.0) for l in range(deployment.link_count)])

        sigma2 = sigma2_from_snr(db_to_linear(self.los), config.noise.snr_db)
        self.noise_models = [
            NoiseModel(
                sigma2=float(s),
                samples=config.noise.samples,
                quantization_step=config.noise.quantization_step_db,
            )
            for s in sigma2
        ]
        seed = config.scenario.seed
        self.noise_rngs = [random_stream(seed, NOISE_STREAM, l) for l in range(deployment.link_count)]
        self.heavy_rngs = (
            [random_stream(seed, HEAVY_TAIL_STREAM, l) for l in range(deployment.link_count)]
            if config.noise.heavy_tail_db > 0
            else None
        )

    def excess_lengths(
        self, tx: int, receivers: Sequence[int], object_pos: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Excess path length and link-crossing flag for each receiver of a broadcast."""
        pos = self.deployment.positions
        p_t = pos[tx]
        p_r = pos[list(receivers)]
        obj = self.config.object
        if obj.shape == ObjectShape.POINT:
            radius = 0.0
            q = np.broadcast_to(np.asarray(object_pos, dtype=float), p_r.shape)
        else:
            radius = obj.radius_m
            q = reflection_points(object_pos, radius, p_t, p_r)
        direct = np.linalg.norm(p_r - p_t, axis=1)
        delta = np.linalg.norm(q - p_t, axis=1) + np.linalg.norm(q - p_r, axis=1) - direct
        _, dist = _segment_foot(np.asarray(object_pos, dtype=float), p_t, p_r)
        return np.maximum(delta, 0.0), dist <= radius

    def synthesize_rss(
        self,
        link_id: int,
        delta: Optional[float] = None,
        crossing: bool = False,
    ) -> float:
        """
        One quantized RSS value in dB.

        `delta` None means the object is absent and no reflection term applies.
        """
        m = self.config.model
        power = self.los[link_id] + self.fades[link_id]
        if delta is not None:
            power += float(
                zeta_values(delta, self.distances[link_id], m.gamma, m.path_loss_exponent,
                            self.deployment.link_frequency(link_id))
            )
            if crossing:
                power -= m.crossing_attenuation_db
        noise = measurement_noise_db(
            self.noise_models[link_id], float(db_to_linear(power)), self.noise_rngs[link_id]
        )
        rss = power + noise
        if self.heavy_rngs is not None:
            rss += heavy_tail_noise(self.config.noise.heavy_tail_db, self.heavy_rngs[link_id])
        return quantize(rss, self.config.noise.quantization_step_db)

    def broadcast(self, frame: int, object_pos: Optional[np.ndarray]) -> list[FrameRecord]:
        """All measurements of one frame, in receiver order."""
        channel, tx = self.schedule.slot(frame)
        receivers, links = self.schedule.receivers(channel, tx)
        time_s = frame * self.config.scenario.frame_interval_s
        truth = None
        if object_pos is None:
            deltas, crossings = [None] * len(links), [False] * len(links)
        else:
            deltas, crossings = self.excess_lengths(tx, receivers, object_pos)
            truth = (float(object_pos[0]), float(object_pos[1]))
        return [
            FrameRecord(
                frame=frame,
                time_s=time_s,
                link=link_id,
                channel=channel,
                rss_db=self.synthesize_rss(link_id, None if delta is None else float(delta), bool(cross)),
                true_position=truth,
            )
            for link_id, delta, cross in zip(links, deltas, crossings)
        ]


# =============================================================================
# Calibration and full runs
# =============================================================================


def estimate_los_baseline(
    frames: Sequence[FrameRecord],
    link_count: int,
    estimator: str = "mean",
    step: float = 1.0,
    single_frame: bool = False,
) -> np.ndarray:
    """
    Per-link LoS power estimate from vacant calibration frames.

    `single_frame` takes each link's first measurement instead of the window estimate.
    """
    samples: list[list[float]] = [[] for _ in range(link_count)]
    for record in frames:
        if record.link >= link_count:
            raise SimulationError(
                f"calibration frame {record.frame} references unknown link {record.link}"
            )
        samples[record.link].append(record.rss_db)
    missing = [l for l, values in enumerate(samples) if not values]
    if missing:
        shown = ", ".join(str(l) for l in missing[:10])
        raise SimulationError(
            f"{len(missing)} links have no calibration frames",
            detail=f"missing links: {shown}{' ...' if len(missing) > 10 else ''}",
        )
    if single_frame:
        return np.array([values[0] for values in samples])
    return np.array([estimate_los_power(values, estimator, step) for values in samples])


def calibrate_from_frames(
    config: ScenarioConfig,
    deployment: Deployment,
    frames: Sequence[FrameRecord],
) -> CalibrationResult:
    """Fit the path-loss model and blacklist deep-faded links from calibration frames."""
    c = config.classifier
    step = config.noise.quantization_step_db
    window = estimate_los_baseline(frames, deployment.link_count, c.los_estimator, step)
    classified = (
        estimate_los_baseline(frames, deployment.link_count, single_frame=True)
        if c.single_frame
        else window
    )
    cal = CalibrationSet(
        los_power=[float(p) for p in classified],
        distances=[float(d) for d in deployment.link_lengths],
        channels=[link.channel for link in deployment.links],
        transmit_power_dbm=config.model.transmit_power_dbm,
        reference_distance=config.model.reference_distance_m,
    )
    result = calibrate(cal, deployment, c.fade_threshold_db)
    if c.single_frame:
        result = result.model_copy(update={"los_power": [float(p) for p in window]})
    return result


class ScenarioRun(BaseModel):
    """Everything one simulated experiment produced."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ScenarioConfig
    deployment: Deployment
    grid: Grid
    calibration_frames: list[FrameRecord]
    frames: list[FrameRecord]
    calibration: CalibrationResult
    detector: DetectorConfig
    estimates: list[EstimateRecord]
    bitstream: list[bytes]
    counter: OperationCounter
    snapshots: list[tuple[int, OccupancyField]]

    @property
    def errors(self) -> np.ndarray:
        return np.array([e.error_m for e in self.estimates if e.error_m is not None])

    @property
    def detection_rate(self) -> float:
        """Fraction of occupied frames that produced a position."""
        occupied = [e for e in self.estimates if e.true_position is not None]
        if not occupied:
            return 0.0
        return sum(1 for e in occupied if e.estimate is not None) / len(occupied)


def run_scenario(config: ScenarioConfig) -> ScenarioRun:
    """Calibrate on a vacant period, then simulate and localize the trajectory."""
    deployment = build_deployment(config)
    grid = build_grid(config)
    simulator = Simulator(config, deployment)
    dt = config.scenario.frame_interval_s

    calibration_count = max(1, round(config.scenario.calibration_s / dt))
    logger.info(
        f"Scenario '{config.scenario.name}': {deployment.node_count} nodes, "
        f"{deployment.link_count} links, {grid.rows}x{grid.cols} pixels, "
        f"{calibration_count} calibration frames"
    )
    calibration_frames: list[FrameRecord] = []
    for frame in range(calibration_count):
        calibration_frames.extend(simulator.broadcast(frame, None))
    calibration = calibrate_from_frames(config, deployment, calibration_frames)

    pipeline = LocalizationPipeline.from_config(config, deployment, grid, calibration)
    positions = trajectory_positions(config)
    interval = config.output.snapshot_interval

    frames: list[FrameRecord] = []
    estimates: list[EstimateRecord] = []
    snapshots: list[tuple[int, OccupancyField]] = []
    for k in range(config.trajectory.frames):
        frame = calibration_count + k
        records = simulator.broadcast(frame, None if positions is None else positions[k])
        frames.extend(records)
        estimates.append(pipeline.process_frame(frame, records))
        if interval and k % interval == 0:
            snapshots.append((frame, pipeline.last_field))

    located = sum(1 for e in estimates if e.estimate is not None)
    logger.info(f"Localized {located} of {len(estimates)} frames, {pipeline.counter.additions} additions")
    return ScenarioRun(
        config=config,
        deployment=deployment,
        grid=grid,
        calibration_frames=calibration_frames,
        frames=frames,
        calibration=calibration,
        detector=pipeline.detector,
        estimates=estimates,
        bitstream=pipeline.bitstream,
        counter=pipeline.counter,
        snapshots=snapshots,
    )
