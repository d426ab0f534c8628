"""
Unit tests for Pydantic models.

Tests:
- Model validation
- Enum values
- Optional field handling
- Default values
"""

import pytest
from pydantic import ValidationError

# Mark all tests in this module as unit tests
pytestmark = pytest.mark.unit


class TestDeploymentModels:
    """Test deployment and grid models."""

    def test_full_mesh_link_order(self):
        """Link id = pair id * C + channel index."""
        from src.models.deployment import Deployment

        deployment = Deployment.full_mesh([(0, 0), (1, 0), (0, 1)], [11, 26])

        assert deployment.link_count == 12
        assert deployment.pairs[:3] == [(0, 1), (0, 2), (1, 0)]
        assert deployment.links[3].tx == 0
        assert deployment.links[3].rx == 2
        assert deployment.links[3].channel == 26
        assert deployment.link_pair_ids.tolist() == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5]
        assert deployment.pair_links[1] == [2, 3]

    def test_channel_frequencies(self):
        """Default frequencies follow the 2.4 GHz channel plan."""
        from src.models.deployment import Deployment

        deployment = Deployment.full_mesh([(0, 0), (3, 4)], [11, 18])

        assert deployment.channel_frequencies == {11: 2.405e9, 18: 2.44e9}
        assert deployment.link_frequency(3) == 2.44e9
        assert deployment.link_lengths.tolist() == [5.0, 5.0, 5.0, 5.0]

    def test_channel_out_of_band(self):
        """Channels outside 11..26 are rejected."""
        from src.models.deployment import ieee_802_15_4_frequency

        with pytest.raises(ValueError):
            ieee_802_15_4_frequency(27)

    def test_duplicate_nodes_rejected(self):
        """Two nodes at the same position are invalid."""
        from src.models.deployment import Deployment

        with pytest.raises(ValidationError):
            Deployment.full_mesh([(1, 1), (1, 1)], [11])

    def test_unknown_node_rejected(self):
        from src.models.deployment import Deployment, Link

        with pytest.raises(ValidationError):
            Deployment(
                node_positions=[(0, 0), (1, 0)],
                links=[Link(tx=0, rx=2, channel=11)],
                channel_frequencies={11: 2.405e9},
            )

    def test_channel_without_frequency_rejected(self):
        from src.models.deployment import Deployment, Link

        with pytest.raises(ValidationError):
            Deployment(
                node_positions=[(0, 0), (1, 0)],
                links=[Link(tx=0, rx=1, channel=15)],
                channel_frequencies={11: 2.405e9},
            )

    def test_grid_covering(self):
        """Test Grid.covering rounds up to whole pixels."""
        from src.models.deployment import Grid

        grid = Grid.covering(1.0, 0.3, 0.25)

        assert (grid.rows, grid.cols) == (2, 4)
        assert grid.pixel_count == 8
        assert grid.row_col(5) == (1, 1)
        assert grid.pixel_center(5).tolist() == [0.375, 0.375]
        assert grid.centers[5].tolist() == [0.375, 0.375]

    def test_grid_exact_cover(self):
        from src.models.deployment import Grid

        grid = Grid.covering(7.0, 6.0, 0.0625)

        assert (grid.rows, grid.cols) == (96, 112)


class TestDetectionModels:
    """Test detector and classifier models."""

    def test_blacklist_all_usable(self):
        from src.models.detection import Blacklist

        blacklist = Blacklist.all_usable(4)

        assert len(blacklist) == 4
        assert blacklist.blacklisted == []

    def test_blacklist_is_binary(self):
        from src.models.detection import Blacklist

        assert Blacklist(usable=[1, 0, 1]).blacklisted == [1]
        with pytest.raises(ValidationError):
            Blacklist(usable=[1, 2])

    def test_detector_thresholds_non_negative(self):
        from src.models.detection import DetectorConfig

        config = DetectorConfig(max_excess_path=0.15625, thresholds=[0.4, 0.0])

        assert config.thresholds == [0.4, 0.0]
        with pytest.raises(ValidationError):
            DetectorConfig(max_excess_path=0.15625, thresholds=[-0.1])
        with pytest.raises(ValidationError):
            DetectorConfig(max_excess_path=0.0, thresholds=[0.4])

    def test_calibration_set_alignment(self):
        """Test CalibrationSet requires aligned, finite inputs."""
        from src.models.detection import CalibrationSet

        with pytest.raises(ValidationError):
            CalibrationSet(los_power=[-50.0], distances=[1.0, 2.0], channels=[11], transmit_power_dbm=0.0)
        with pytest.raises(ValidationError):
            CalibrationSet(los_power=[float("nan")], distances=[1.0], channels=[11], transmit_power_dbm=0.0)
        with pytest.raises(ValidationError):
            CalibrationSet(los_power=[-50.0], distances=[0.0], channels=[11], transmit_power_dbm=0.0)


class TestChannelModels:
    """Test propagation and noise parameters."""

    def test_reflection_coefficient_range(self):
        from src.models.channel import ReflectionParams

        ReflectionParams(gamma=0.0, eta=2.0, distance=3.0, frequency=2.405e9)
        with pytest.raises(ValidationError):
            ReflectionParams(gamma=1.0, eta=2.0, distance=3.0, frequency=2.405e9)

    def test_path_loss_defaults(self):
        from src.models.channel import PathLossParams

        params = PathLossParams(transmit_power_dbm=0.0, reference_power_db=40.0, eta=2.0)

        assert params.reference_distance == 1.0

    def test_noise_defaults(self):
        """Test NoiseModel default sample count and quantization."""
        from src.models.noise import DEFAULT_SAMPLES, NoiseModel

        noise = NoiseModel(sigma2=1e-6)

        assert noise.samples == DEFAULT_SAMPLES == 512
        assert noise.quantization_step == 1.0

    def test_noise_variance_positive(self):
        from src.models.noise import NoiseModel

        with pytest.raises(ValidationError):
            NoiseModel(sigma2=0.0)


class TestScenarioModels:
    """Test scenario configuration and records."""

    def test_enum_values(self):
        from src.models.scenario import ObjectShape, TrajectoryKind

        assert ObjectShape.POINT.value == "point"
        assert ObjectShape.CIRCLE.value == "circle"
        assert TrajectoryKind.RANDOM_WALK.value == "random_walk"
        assert TrajectoryKind.VACANT.value == "vacant"

    def test_defaults(self):
        from src.models.scenario import ScenarioConfig

        config = ScenarioConfig()

        assert config.noise.samples == 512
        assert config.deployment.channels == [11, 18, 26]
        assert config.output.bitstream is True
        assert config.fades == {}

    def test_string_lists(self):
        """Test that file-style strings parse into lists and points."""
        from src.models.scenario import DeploymentSection, TrajectorySection

        deployment = DeploymentSection(layout="explicit", nodes="0 0; 2.5 0; 2.5 1", channels="11, 15,26")
        trajectory = TrajectorySection(kind="waypoints", waypoints="1 1; 2,2")

        assert deployment.channels == [11, 15, 26]
        assert deployment.nodes[1] == (2.5, 0.0)
        assert trajectory.waypoints == [(1.0, 1.0), (2.0, 2.0)]

    def test_bad_point(self):
        from src.models.scenario import TrajectorySection

        with pytest.raises(ValidationError):
            TrajectorySection(kind="waypoints", waypoints="1 1 1")

    def test_unknown_key_rejected(self):
        from src.models.scenario import NoiseSection

        with pytest.raises(ValidationError):
            NoiseSection(snr=20)

    def test_explicit_layout_needs_nodes(self):
        from src.models.scenario import DeploymentSection

        with pytest.raises(ValidationError):
            DeploymentSection(layout="explicit", nodes="0 0")

    def test_estimate_status(self):
        """Test EstimateRecord.status follows the estimate."""
        from src.models.scenario import EstimateRecord

        missing = EstimateRecord(frame=0, time_s=0.0)
        found = EstimateRecord(frame=1, time_s=0.005, estimate=(1.0, 2.0), error_m=0.1, support_pixels=3)

        assert missing.status == "no_occupancy"
        assert missing.true_position is None
        assert found.status == "ok"

    def test_frame_record_frozen(self):
        from src.models.scenario import FrameRecord

        record = FrameRecord(frame=0, time_s=0.0, link=0, channel=11, rss_db=-60.0)

        with pytest.raises(ValidationError):
            record.rss_db = -61.0


class TestCommonModels:
    """Test shared error types."""

    def test_rti_error(self):
        from src.models.common import RTIError

        error = RTIError("bad frame", detail="link 9")

        assert str(error) == "bad frame"
        assert error.detail == "link 9"

    def test_error_report(self):
        from src.models.common import ErrorReport

        report = ErrorReport(error="unknown key", code="ConfigError")

        assert report.success is False
        assert report.exit_code == 1
        assert report.timestamp is not None
