"""
Tests for the click-rate and coincidence monitors.

The separation scenario uses a minimum-error Bob: his detectors fire on
the wrong bit often enough that honest traffic shows about 39 double
clicks per million slots, which a faked-state attack removes.
"""
import math

import numpy as np
from django.test import SimpleTestCase

from attack.clicklog import ClickLog
from attack.countermeasures import DetectorMonitor
from attack.domain import ChannelModel, MonitorConfig, Scenario, StrategyParams
from attack.exceptions import InsufficientData, OutOfRange
from attack.povm import TwoStateDiscriminator
from attack.simulation import AttackSimulator

W = 0.6
BOB_MU = TwoStateDiscriminator.special_mu(W, 'breidbart')


def separation_scenario(seed, pulses=1_000_000, strategy=None):
    channel = ChannelModel(transmittance=0.1, efficiency=0.2, dark_count_prob=1e-5, pulses=pulses)
    baseline = AttackSimulator.baseline_stats(channel, BOB_MU, W, 0.01)
    if strategy is None:
        strategy = AttackSimulator.solve_matching(W, 0.5, baseline, pulses)
    scenario = Scenario(
        w=W, channel=channel, bob_mu=BOB_MU, strategy=strategy, seed=seed,
        intrinsic_error=0.01, record_log=True,
    )
    return scenario, baseline


def synthetic_log(clicks_a, clicks_b, alice=None):
    n = len(clicks_a)
    det_a = np.asarray(clicks_a, dtype=bool)
    det_b = np.asarray(clicks_b, dtype=bool)
    alice = np.zeros(n, dtype=np.int8) if alice is None else np.asarray(alice, dtype=np.int8)
    bits = np.where(det_a, 0, np.where(det_b, 1, -1)).astype(np.int8)
    return ClickLog(
        alice_bit=alice,
        eve_outcome=np.full(n, -1, dtype=np.int8),
        action=np.full(n, 2, dtype=np.int8),
        bob_click=det_a | det_b,
        bob_bit=bits,
        detector_a=det_a,
        detector_b=det_b,
    )


class MonitorConfigTestCase(SimpleTestCase):
    """
    Test case for MonitorConfig validation.
    """

    def test_defaults(self):
        """Test the default thresholds are 4 sigma over windows of 10000 slots."""
        config = MonitorConfig()
        self.assertEqual((config.window_size, config.rate_threshold, config.coincidence_threshold),
                         (10000, 4.0, 4.0))

    def test_invalid_values(self):
        """Test small windows and non-positive thresholds are rejected."""
        with self.assertRaises(OutOfRange):
            MonitorConfig(window_size=99)
        with self.assertRaises(OutOfRange):
            MonitorConfig(rate_threshold=0.0)
        with self.assertRaises(OutOfRange):
            MonitorConfig(coincidence_threshold=-1.0)


class ClickStatisticsMonitorTestCase(SimpleTestCase):
    """
    Test case for click_statistics_monitor.
    """

    def setUp(self):
        """Monitor configuration with the default thresholds."""
        self.config = MonitorConfig(window_size=1000)

    def test_window_truncation(self):
        """Test only complete windows are used."""
        log = synthetic_log([True] * 10 + [False] * 2490, [False] * 2500)
        verdict = DetectorMonitor.click_statistics_monitor(log, self.config, 0.005)
        self.assertEqual(verdict.window_count, 2)
        self.assertEqual(verdict.observed, 10.0)
        self.assertAlmostEqual(verdict.expected, 10.0, delta=1e-12)
        self.assertAlmostEqual(verdict.z_score, 0.0, delta=1e-9)
        self.assertFalse(verdict.flagged)

    def test_z_score(self):
        """Test z = (k - n r) / sqrt(n r (1 - r)) and the two-sided p-value."""
        log = synthetic_log([True] * 40 + [False] * 960, [False] * 1000)
        verdict = DetectorMonitor.click_statistics_monitor(log, self.config, 0.01)
        z = 30 / math.sqrt(1000 * 0.01 * 0.99)
        self.assertAlmostEqual(verdict.z_score, z, delta=1e-12)
        self.assertAlmostEqual(verdict.statistic, abs(z), delta=1e-12)
        self.assertTrue(verdict.flagged)
        self.assertLess(verdict.p_value, 1e-10)

    def test_short_log(self):
        """Test a log shorter than one window raises InsufficientData."""
        with self.assertRaises(InsufficientData):
            DetectorMonitor.click_statistics_monitor(synthetic_log([True] * 10, [False] * 10), self.config, 0.1)

    def test_expected_rate_range(self):
        """Test expected rates outside (0, 1) are rejected."""
        log = synthetic_log([False] * 1000, [False] * 1000)
        for rate in (0.0, 1.0):
            with self.assertRaises(OutOfRange):
                DetectorMonitor.click_statistics_monitor(log, self.config, rate)


class CoincidenceMonitorTestCase(SimpleTestCase):
    """
    Test case for coincidence_monitor.
    """

    def setUp(self):
        """Monitor configuration with the default thresholds."""
        self.config = MonitorConfig(window_size=1000)

    def test_expected_from_independence(self):
        """Test the expectation is the product of per-bit detector rates."""
        det_a = [True] * 100 + [False] * 900
        det_b = [True] * 10 + [False] * 90 + [True] * 90 + [False] * 810
        verdict = DetectorMonitor.coincidence_monitor(synthetic_log(det_a, det_b), self.config)
        self.assertAlmostEqual(verdict.expected, 1000 * 0.1 * 0.1, delta=1e-12)
        self.assertEqual(verdict.observed, 10.0)
        self.assertFalse(verdict.flagged)

    def test_no_clicks(self):
        """Test a window without clicks raises InsufficientData."""
        with self.assertRaises(InsufficientData):
            DetectorMonitor.coincidence_monitor(synthetic_log([False] * 1000, [False] * 1000), self.config)

    def test_one_detector_only(self):
        """Test clicks on a single detector predict no coincidences."""
        with self.assertRaises(InsufficientData):
            DetectorMonitor.coincidence_monitor(synthetic_log([True] * 1000, [False] * 1000), self.config)


class SeparationTestCase(SimpleTestCase):
    """
    Test case for the countermeasure separation between honest and attacked traffic.
    """

    def setUp(self):
        """Default monitor configuration."""
        self.config = MonitorConfig()

    def test_matched_attack_separated(self):
        """Test the matched attack passes the rate monitor and fails the coincidence monitor."""
        rate_flags = 0
        coincidence_flags = 0
        for seed in range(10):
            scenario, baseline = separation_scenario(seed)
            log = AttackSimulator.simulate(scenario).log
            rate = DetectorMonitor.click_statistics_monitor(log, self.config, baseline.gain_per_pulse)
            coincidence = DetectorMonitor.coincidence_monitor(log, self.config)
            rate_flags += rate.flagged
            coincidence_flags += coincidence.flagged
        self.assertLessEqual(rate_flags, 1)
        self.assertGreaterEqual(coincidence_flags, 9)

    def test_honest_traffic_not_flagged(self):
        """Test honest traffic flags each monitor on at most one of ten seeds."""
        rate_flags = 0
        coincidence_flags = 0
        for seed in range(10):
            scenario, baseline = separation_scenario(100 + seed)
            log = AttackSimulator.simulate_honest(scenario).log
            rate_flags += DetectorMonitor.click_statistics_monitor(
                log, self.config, baseline.gain_per_pulse).flagged
            coincidence_flags += DetectorMonitor.coincidence_monitor(log, self.config).flagged
        self.assertLessEqual(rate_flags, 1)
        self.assertLessEqual(coincidence_flags, 1)

    def test_false_positive_rate(self):
        """Test the honest false-positive rate stays near 2 Phi(-4) over 100 seeds."""
        flags = {'rate': 0, 'coincidence': 0}
        for seed in range(100):
            scenario, baseline = separation_scenario(1000 + seed, pulses=100_000)
            log = AttackSimulator.simulate_honest(scenario).log
            flags['rate'] += DetectorMonitor.click_statistics_monitor(
                log, self.config, baseline.gain_per_pulse).flagged
            flags['coincidence'] += DetectorMonitor.coincidence_monitor(log, self.config).flagged
        for name, count in flags.items():
            self.assertLessEqual(count / 100, 2 * 3.2e-5 + 0.02, msg=name)

    def test_unthrottled_attack_flagged_by_rate(self):
        """Test xi = 1 makes Bob click far more often than expected."""
        strategy = StrategyParams(mu=0.5)
        scenario, baseline = separation_scenario(4, pulses=200_000, strategy=strategy)
        log = AttackSimulator.simulate(scenario).log
        verdict = DetectorMonitor.click_statistics_monitor(log, self.config, baseline.gain_per_pulse)
        self.assertTrue(verdict.flagged)
        self.assertGreater(verdict.z_score, 0)
