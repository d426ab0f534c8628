"""
Unit tests for the classifier service.

Tests:
- Fade levels and blacklisting
- Path-loss least-squares fit
- LoS power estimators
- Link classification against a deployment
"""

import numpy as np
import pytest

from src.models.channel import PathLossParams
from src.models.detection import CalibrationSet
from src.services.channel import los_power
from src.services.classifier import (
    CalibrationError,
    blacklist,
    calibrate,
    channel_majority_blacklist,
    estimate_los_power,
    fade_level,
    fit_path_loss,
)

pytestmark = pytest.mark.unit


def noiseless_set(deployment, eta=2.3, reference=None, transmit=0.0) -> CalibrationSet:
    """Calibration set whose LoS powers follow the log-distance model exactly."""
    reference = reference or {c: 40.0 + 0.5 * i for i, c in enumerate(deployment.channels)}
    distances = [float(d) for d in deployment.link_lengths]
    channels = [link.channel for link in deployment.links]
    powers = [
        los_power(PathLossParams(transmit_power_dbm=transmit, reference_power_db=reference[c], eta=eta), d)
        for d, c in zip(distances, channels)
    ]
    return CalibrationSet(
        los_power=powers, distances=distances, channels=channels, transmit_power_dbm=transmit
    )


class TestFadeLevel:

    def test_matching_prediction(self):
        assert fade_level(-55.0, -55.0) == 0.0

    def test_deep_fade(self):
        assert fade_level(-80.0, -55.0) == -25.0

    def test_anti_fade(self):
        assert fade_level(-50.0, -55.0) > 0.0


class TestBlacklist:

    @pytest.mark.parametrize(("fade", "expected"), [(-20.0, 0), (-19.99, 1), (3.0, 1), (-25.0, 0)])
    def test_threshold_is_inclusive(self, fade, expected):
        assert blacklist(fade, -20.0) == expected

    def test_threshold_must_be_negative(self):
        with pytest.raises(CalibrationError):
            blacklist(-5.0, 0.0)

    @pytest.mark.parametrize(("flags", "expected"), [([0, 0, 1], 0), ([1, 1, 0], 1), ([0, 1], 1), ([0], 0)])
    def test_channel_majority(self, flags, expected):
        assert channel_majority_blacklist(flags) == expected


class TestPathLossFit:
    """Shared exponent, per-channel reference loss."""

    def test_noiseless_recovery(self, small_deployment):
        reference = {11: 38.5, 26: 41.25}
        fit = fit_path_loss(noiseless_set(small_deployment, eta=2.7, reference=reference))
        assert fit.eta == pytest.approx(2.7, abs=1e-9)
        for channel, value in reference.items():
            assert fit.reference_power_db[channel] == pytest.approx(value, abs=1e-9)
        assert fit.residual_norm < 1e-9

    def test_noisy_recovery(self):
        """200 links with 1 dB noise: the exponent stays within 0.1 in nearly every seed."""
        distances = np.linspace(0.5, 12.0, 200)
        channels = [11, 18, 26, 15] * 50
        truth = 2.0
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            powers = [
                los_power(PathLossParams(transmit_power_dbm=0.0, reference_power_db=40.0, eta=truth), d)
                + rng.normal(0.0, 1.0)
                for d in distances
            ]
            cal = CalibrationSet(
                los_power=powers, distances=list(distances), channels=channels, transmit_power_dbm=0.0
            )
            hits += abs(fit_path_loss(cal).eta - truth) < 0.1
        assert hits >= 95

    def test_single_distance_is_rejected(self, two_node_deployment):
        with pytest.raises(CalibrationError):
            fit_path_loss(noiseless_set(two_node_deployment))


class TestLosEstimator:

    def test_mean(self):
        assert estimate_los_power([-60.0, -62.0, -61.0]) == -61.0

    def test_mode(self):
        assert estimate_los_power([-60.0, -61.0, -61.0, -62.0], "mode") == -61.0

    def test_tied_modes_are_averaged(self):
        assert estimate_los_power([-60.0, -60.0, -62.0, -62.0], "mode") == -61.0

    def test_mode_quantizes(self):
        assert estimate_los_power([-60.2, -59.9, -61.4], "mode", step=1.0) == -60.0

    def test_gaussian_samples(self):
        """1000 samples with 0.5 dB spread land within 0.05 dB."""
        within = 0
        for seed in range(100):
            samples = np.random.default_rng(seed).normal(-58.0, 0.5, 1000)
            within += abs(estimate_los_power(samples) + 58.0) < 0.05
        assert within >= 95

    def test_empty(self):
        with pytest.raises(CalibrationError):
            estimate_los_power([])

    def test_unknown_estimator(self):
        with pytest.raises(CalibrationError):
            estimate_los_power([-60.0], "median")


class TestClassifyLinks:

    def test_clean_deployment_keeps_everything(self, small_deployment):
        result = calibrate(noiseless_set(small_deployment), small_deployment, -20.0)
        assert result.blacklist.blacklisted == []
        assert all(flag == 1 for flag in result.link_usable)
        assert max(abs(f) for f in result.fade_levels) < 1e-9

    def test_deep_fade_blacklists_pair(self, small_deployment):
        cal = noiseless_set(small_deployment)
        powers = list(cal.los_power)
        # both channels of pair 5 fade by 25 dB
        for link in small_deployment.pair_links[5]:
            powers[link] -= 25.0
        faded = cal.model_copy(update={"los_power": powers})
        result = calibrate(faded, small_deployment, -20.0)
        assert result.blacklist.blacklisted == [5]
        assert [result.link_usable[l] for l in small_deployment.pair_links[5]] == [0, 0]

    def test_single_channel_fade_ties_and_keeps_pair(self, small_deployment):
        cal = noiseless_set(small_deployment)
        powers = list(cal.los_power)
        powers[small_deployment.pair_links[3][0]] -= 30.0
        result = calibrate(cal.model_copy(update={"los_power": powers}), small_deployment, -20.0)
        assert result.blacklist.usable[3] == 1
        assert result.link_usable[small_deployment.pair_links[3][0]] == 0

    def test_dimension_mismatch(self, small_deployment, two_node_deployment):
        with pytest.raises(CalibrationError):
            calibrate(noiseless_set(small_deployment), two_node_deployment, -20.0)
