"""
Integration tests for the simulator.

Tests:
- Reflection geometry on a circular object
- Trajectories and the broadcast schedule
- RSS synthesis against the propagation model
- Seeded determinism
- Calibration from vacant frames
"""

import logging
import math

import numpy as np
import pytest

from src.models.scenario import ObjectShape
from src.services.channel import zeta_values
from src.services.scenario_io import build_deployment, parse_scenario
from src.services.simulator import (
    Schedule,
    SimulationError,
    Simulator,
    calibrate_from_frames,
    estimate_los_baseline,
    random_stream,
    random_walk_positions,
    reflection_point,
    reflection_points,
    run_scenario,
    standstill_positions,
    trajectory_positions,
    waypoint_positions,
)

pytestmark = pytest.mark.integration

# Noise far below the signal and no quantization: RSS equals the model value
CLEAN = ["noise.snr_db=200", "noise.quantization_step_db=0"]


@pytest.fixture
def clean_config(small_scenario_text):
    return parse_scenario(small_scenario_text, CLEAN)


class TestReflection:
    """Specular points on the circular object."""

    def test_symmetric_link(self):
        point = reflection_point((0.0, 1.0), ObjectShape.CIRCLE, (-1.0, 0.0), (1.0, 0.0), radius=0.2)
        assert point == pytest.approx((0.0, 0.8), abs=1e-6)

    def test_specular_point_is_shortest_path(self):
        center, radius = np.array([0.3, 0.9]), 0.25
        p_t, p_r = np.array([-1.0, 0.0]), np.array([1.5, 0.2])
        q = reflection_point(center, ObjectShape.CIRCLE, p_t, p_r, radius)
        theta = np.linspace(0.0, 2.0 * math.pi, 20_001)
        ring = center + radius * np.column_stack([np.cos(theta), np.sin(theta)])
        shortest = np.min(np.linalg.norm(ring - p_t, axis=1) + np.linalg.norm(ring - p_r, axis=1))
        assert np.linalg.norm(q - p_t) + np.linalg.norm(q - p_r) <= shortest + 1e-9
        assert np.linalg.norm(q - center) == pytest.approx(radius)

    def test_crossing_link_uses_point_nearest_transmitter(self):
        point = reflection_point((0.0, 0.0), ObjectShape.CIRCLE, (-1.0, 0.0), (1.0, 0.0), radius=0.2)
        assert point == pytest.approx((-0.2, 0.0), abs=1e-12)

    def test_small_circle_approaches_point(self):
        p_t, p_r = (0.0, 0.0), (3.0, 0.0)
        obj = (1.2, 0.7)
        point = reflection_point(obj, ObjectShape.POINT, p_t, p_r)
        circle = reflection_point(obj, ObjectShape.CIRCLE, p_t, p_r, radius=1e-5)
        assert np.linalg.norm(circle - point) <= 1e-5 + 1e-9

    def test_batch_matches_single(self):
        p_r = np.array([[2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
        batch = reflection_points((1.0, 1.0), 0.2, (0.0, 0.0), p_r)
        for q, receiver in zip(batch, p_r):
            single = reflection_point((1.0, 1.0), ObjectShape.CIRCLE, (0.0, 0.0), receiver, 0.2)
            np.testing.assert_allclose(q, single, atol=1e-9)

    def test_node_inside_object(self):
        with pytest.raises(SimulationError):
            reflection_point((0.05, 0.0), ObjectShape.CIRCLE, (0.0, 0.0), (2.0, 0.0), radius=0.2)


class TestTrajectories:

    def test_waypoint_speed(self):
        positions = waypoint_positions([(0.0, 0.0), (1.0, 0.0)], 0.5, 0.01, 100, loop=False)
        steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
        np.testing.assert_allclose(steps, 0.005, atol=1e-12)
        assert positions[0].tolist() == [0.0, 0.0]

    def test_waypoints_stop_at_end(self):
        positions = waypoint_positions([(0.0, 0.0), (0.1, 0.0)], 1.0, 0.05, 5, loop=False)
        assert positions[-1] == pytest.approx((0.1, 0.0))

    def test_waypoint_loop_returns_to_start(self):
        square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
        # perimeter 4 m at 1 m/s and 0.1 s per frame
        positions = waypoint_positions(square, 1.0, 0.1, 41, loop=True)
        assert positions[40] == pytest.approx((0.0, 0.0), abs=1e-9)
        assert positions[10] == pytest.approx((1.0, 0.0), abs=1e-9)

    def test_coincident_waypoints_stand_still(self):
        for loop in (True, False):
            positions = waypoint_positions([(1.0, 1.0), (1.0, 1.0)], 0.3, 0.005, 5, loop=loop)
            assert positions.tolist() == [[1.0, 1.0]] * 5

    def test_configured_coincident_waypoints(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, ["trajectory.waypoints=1.0 1.0; 1.0 1.0"])
        positions = trajectory_positions(config)
        assert np.all(np.isfinite(positions))
        assert np.all(positions == 1.0)

    def test_standstill_dwell(self):
        positions = standstill_positions([(1.0, 1.0), (2.0, 2.0)], 0.02, 0.005, 10)
        assert [tuple(p) for p in positions[:4]] == [(1.0, 1.0)] * 4
        assert [tuple(p) for p in positions[4:8]] == [(2.0, 2.0)] * 4
        assert tuple(positions[8]) == (1.0, 1.0)

    def test_random_walk_stays_inside(self):
        bounds = (0.5, 0.5, 1.5, 1.0)
        positions = random_walk_positions(bounds, 1.0, 0.01, 2000, random_stream(3, 1))
        assert np.all(positions[:, 0] >= 0.5) and np.all(positions[:, 0] <= 1.5)
        assert np.all(positions[:, 1] >= 0.5) and np.all(positions[:, 1] <= 1.0)
        steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
        np.testing.assert_allclose(steps, 0.01, atol=1e-12)

    def test_random_walk_without_room(self):
        with pytest.raises(SimulationError):
            random_walk_positions((1.0, 1.0, 0.5, 2.0), 1.0, 0.01, 10, random_stream(3, 1))

    def test_random_walk_step_larger_than_area(self):
        with pytest.raises(SimulationError):
            random_walk_positions((0.5, 0.5, 0.6, 0.6), 100.0, 0.01, 10, random_stream(3, 1))

    def test_random_walk_stall_is_logged(self, caplog):
        # zero-height strip: no random heading keeps the step inside
        with caplog.at_level(logging.WARNING, logger="src.services.simulator"):
            positions = random_walk_positions((0.0, 1.0, 1.0, 1.0), 10.0, 0.01, 5, random_stream(3, 1))
        assert positions.tolist() == [[0.5, 1.0]] * 5
        assert "no heading inside the area on 5 of 5 frames" in caplog.text

    def test_vacant(self, vacant_config):
        assert trajectory_positions(vacant_config) is None

    def test_configured_waypoints(self, small_config):
        positions = trajectory_positions(small_config)
        assert positions.shape == (60, 2)
        assert tuple(positions[0]) == (0.6, 0.6)


class TestSchedule:

    def test_every_link_once_per_cycle(self, small_deployment):
        schedule = Schedule(small_deployment)
        assert schedule.cycle_length == small_deployment.node_count * 2
        seen = []
        for frame in range(schedule.cycle_length):
            channel, tx = schedule.slot(frame)
            receivers, links = schedule.receivers(channel, tx)
            assert tx not in receivers
            assert all(small_deployment.links[l].channel == channel for l in links)
            seen.extend(links)
        assert sorted(seen) == list(range(small_deployment.link_count))

    def test_channel_outer_order(self, small_deployment):
        schedule = Schedule(small_deployment)
        n = small_deployment.node_count
        assert [schedule.slot(k) for k in range(n)] == [(11, tx) for tx in range(n)]
        assert schedule.slot(n) == (26, 0)
        assert schedule.slot(2 * n) == schedule.slot(0)


class TestSynthesis:
    """RSS values against the propagation model."""

    def test_vacant_rss_is_los_power(self, clean_config):
        deployment = build_deployment(clean_config)
        simulator = Simulator(clean_config, deployment)
        for link_id in (0, 7, 33):
            assert simulator.synthesize_rss(link_id) == pytest.approx(simulator.los[link_id], abs=1e-9)

    def test_reflection_adds_zeta(self, clean_config):
        deployment = build_deployment(clean_config)
        simulator = Simulator(clean_config, deployment)
        link_id, delta = 5, 0.08
        expected = simulator.los[link_id] + float(
            zeta_values(delta, deployment.link_lengths[link_id], 0.5, 2.0, deployment.link_frequency(link_id))
        )
        assert simulator.synthesize_rss(link_id, delta) == pytest.approx(expected, abs=1e-9)

    def test_crossing_attenuation(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, CLEAN + ["crossing_attenuation_db=3"])
        simulator = Simulator(config, build_deployment(config))
        clear = simulator.synthesize_rss(2, 0.0)
        crossed = simulator.synthesize_rss(2, 0.0, crossing=True)
        assert clear - crossed == pytest.approx(3.0, abs=1e-9)

    @pytest.mark.parametrize("shape, crossing", [("circle", True), ("point", False)])
    def test_crossing_flag_uses_object_extent(self, small_scenario_text, shape, crossing):
        config = parse_scenario(small_scenario_text, [f"object.shape={shape}"])
        deployment = build_deployment(config)
        simulator = Simulator(config, deployment)
        p_t, p_r = deployment.positions[0], deployment.positions[1]
        u = (p_r - p_t) / np.linalg.norm(p_r - p_t)
        # 0.1 m off the link, inside the default 0.1575 m radius
        obj = (p_t + p_r) / 2.0 + 0.1 * np.array([-u[1], u[0]])
        _, flags = simulator.excess_lengths(0, [1], obj)
        assert bool(flags[0]) is crossing

    def test_injected_fade(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, CLEAN + ["fades.4=-25"])
        simulator = Simulator(config, build_deployment(config))
        assert simulator.synthesize_rss(4) == pytest.approx(simulator.los[4] - 25.0, abs=1e-9)

    def test_fade_on_unknown_link(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, ["fades.999=-25"])
        with pytest.raises(SimulationError):
            Simulator(config, build_deployment(config))

    def test_quantized_rss(self, small_config):
        simulator = Simulator(small_config, build_deployment(small_config))
        records = simulator.broadcast(0, np.array([1.0, 1.0]))
        assert all(r.rss_db == round(r.rss_db) for r in records)

    def test_noise_raises_power(self, small_scenario_text):
        """Noise power adds to the signal, so the noise term is never negative."""
        config = parse_scenario(small_scenario_text, ["noise.snr_db=5", "noise.quantization_step_db=0"])
        simulator = Simulator(config, build_deployment(config))
        values = np.array([simulator.synthesize_rss(3) for _ in range(200)])
        assert np.all(values > simulator.los[3])

    def test_broadcast_records(self, small_config):
        deployment = build_deployment(small_config)
        simulator = Simulator(small_config, deployment)
        records = simulator.broadcast(7, np.array([1.0, 1.2]))
        channel, tx = simulator.schedule.slot(7)
        assert len(records) == deployment.node_count - 1
        assert all(r.frame == 7 and r.channel == channel for r in records)
        assert all(deployment.links[r.link].tx == tx for r in records)
        assert records[0].time_s == pytest.approx(0.035)
        assert records[0].true_position == (1.0, 1.2)


class TestDeterminism:

    def test_same_seed_same_run(self, small_config):
        first = run_scenario(small_config)
        second = run_scenario(small_config)
        assert first.frames == second.frames
        assert first.calibration_frames == second.calibration_frames
        assert first.estimates == second.estimates
        assert first.bitstream == second.bitstream

    def test_seed_changes_noise(self, small_scenario_text):
        a = run_scenario(parse_scenario(small_scenario_text, ["noise.quantization_step_db=0"], seed=1))
        b = run_scenario(parse_scenario(small_scenario_text, ["noise.quantization_step_db=0"], seed=2))
        assert [r.rss_db for r in a.frames] != [r.rss_db for r in b.frames]

    def test_streams_are_independent(self):
        a = random_stream(5, 0, 0).random(4)
        b = random_stream(5, 0, 1).random(4)
        c = random_stream(5, 0, 0).random(4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, c)


class TestCalibration:
    """Vacant-period calibration of the simulated network."""

    def _calibration_frames(self, config):
        deployment = build_deployment(config)
        simulator = Simulator(config, deployment)
        frames = []
        for frame in range(2 * simulator.schedule.cycle_length):
            frames.extend(simulator.broadcast(frame, None))
        return deployment, frames

    def test_recovers_model(self, clean_config):
        deployment, frames = self._calibration_frames(clean_config)
        result = calibrate_from_frames(clean_config, deployment, frames)
        assert result.fit.eta == pytest.approx(2.0, abs=1e-6)
        assert result.fit.reference_power_db[11] == pytest.approx(40.0, abs=1e-6)
        assert result.fit.reference_power_db[26] == pytest.approx(40.0, abs=1e-6)
        assert result.blacklist.blacklisted == []

    def test_channel_offsets(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, CLEAN + ["model.channel_offsets_db=0, 1.5"])
        deployment, frames = self._calibration_frames(config)
        result = calibrate_from_frames(config, deployment, frames)
        assert result.fit.reference_power_db[26] - result.fit.reference_power_db[11] == pytest.approx(1.5, abs=1e-6)

    def test_deep_fade_blacklists_pair(self, small_scenario_text):
        # links 10 and 11 are both channels of pair 5
        config = parse_scenario(small_scenario_text, CLEAN + ["fades.10=-30", "fades.11=-30"])
        deployment, frames = self._calibration_frames(config)
        result = calibrate_from_frames(config, deployment, frames)
        assert result.link_usable[10] == 0
        assert result.link_usable[11] == 0
        assert result.blacklist.blacklisted == [5]

    def test_single_faded_channel_keeps_pair(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, CLEAN + ["fades.10=-30"])
        deployment, frames = self._calibration_frames(config)
        result = calibrate_from_frames(config, deployment, frames)
        assert result.link_usable[10] == 0
        assert result.blacklist.blacklisted == []

    def test_single_frame_classification(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, ["classifier.single_frame=true"])
        deployment, frames = self._calibration_frames(config)
        result = calibrate_from_frames(config, deployment, frames)
        window = estimate_los_baseline(frames, deployment.link_count)
        np.testing.assert_allclose(result.los_power, window)

    def test_mode_estimator(self, small_config):
        deployment, frames = self._calibration_frames(small_config)
        baseline = estimate_los_baseline(frames, deployment.link_count, "mode", 1.0)
        assert np.all(baseline == np.round(baseline * 2) / 2)

    def test_short_calibration_misses_links(self, small_config):
        deployment = build_deployment(small_config)
        simulator = Simulator(small_config, deployment)
        frames = simulator.broadcast(0, None)
        with pytest.raises(SimulationError):
            estimate_los_baseline(frames, deployment.link_count)

    def test_run_with_too_short_calibration(self, small_scenario_text):
        config = parse_scenario(small_scenario_text, ["scenario.calibration_s=0.02"])
        with pytest.raises(SimulationError):
            run_scenario(config)
