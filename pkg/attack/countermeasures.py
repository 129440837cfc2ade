"""
Detector-side monitors that look for a blinding attack in Bob's click log.

Both monitors work on the complete windows of a log (a trailing partial
window is ignored) and compare a z-score against a threshold.
"""
import logging
import math

import numpy as np
from scipy import stats

from .domain import MonitorVerdict
from .exceptions import InsufficientData, OutOfRange

logger = logging.getLogger(__name__)


def _complete_windows(log, config):
    windows = len(log) // config.window_size
    if windows == 0:
        raise InsufficientData(
            f'log has {len(log)} slots, fewer than one window of {config.window_size}',
            field='window_size',
        )
    return windows, log.head(windows * config.window_size)


def _two_sided_p(z):
    return float(2.0 * stats.norm.sf(abs(z)))


class DetectorMonitor:
    """
    Service class for the two countermeasures.

    Provides methods to:
    - Test Bob's click rate against the rate expected from the channel
    - Test the double-click count against detector independence
    """

    @staticmethod
    def click_statistics_monitor(log, config, expected_rate):
        """
        Flag a click rate that departs from ``expected_rate``.

        With n slots, k clicks and expected rate r:

            z = (k - n r) / sqrt(n r (1 - r))

        Args:
            log (ClickLog): Bob's click log
            config (MonitorConfig): window size and thresholds
            expected_rate (float): per-slot click probability without Eve, in (0, 1)

        Returns:
            MonitorVerdict: statistic |z| against ``rate_threshold``

        Raises:
            InsufficientData: if the log is shorter than one window
            OutOfRange: if ``expected_rate`` is not in (0, 1)
        """
        if not 0.0 < expected_rate < 1.0:
            raise OutOfRange(f'expected_rate={expected_rate!r} outside (0, 1)', field='expected_rate')
        windows, window = _complete_windows(log, config)
        n = len(window)
        observed = int(np.count_nonzero(window.bob_click))
        expected = n * expected_rate
        z = (observed - expected) / math.sqrt(expected * (1.0 - expected_rate))
        flagged = abs(z) > config.rate_threshold
        if flagged:
            logger.warning('Click rate monitor flagged: %d clicks, %.1f expected (z=%.2f)',
                           observed, expected, z)
        return MonitorVerdict(
            flagged=flagged,
            statistic=abs(z),
            threshold=config.rate_threshold,
            window_count=windows,
            z_score=z,
            p_value=_two_sided_p(z),
            observed=float(observed),
            expected=expected,
        )

    @staticmethod
    def coincidence_monitor(log, config):
        """
        Flag a double-click count inconsistent with independent detectors.

        Detectors are treated as independent given Alice's bit b, so the
        expected coincidence count is sum_b n_b pA_b pB_b with per-bit
        empirical firing rates. A faked-state attack drives it towards zero.

            z = (observed - expected) / sqrt(expected)

        Returns:
            MonitorVerdict: statistic |z| against ``coincidence_threshold``

        Raises:
            InsufficientData: if the log is shorter than one window, has no
                clicks, or predicts no coincidences at all
        """
        windows, window = _complete_windows(log, config)
        if not np.any(window.bob_click):
            raise InsufficientData('no clicks in the monitored windows', field='log')

        expected = 0.0
        for bit in (0, 1):
            mask = window.alice_bit == bit
            slots = int(np.count_nonzero(mask))
            if slots == 0:
                continue
            rate_a = np.count_nonzero(window.detector_a[mask]) / slots
            rate_b = np.count_nonzero(window.detector_b[mask]) / slots
            expected += slots * rate_a * rate_b
        if expected <= 0.0:
            raise InsufficientData('independent detectors predict no coincidences', field='log')

        observed = int(np.count_nonzero(window.double_clicks))
        z = (observed - expected) / math.sqrt(expected)
        flagged = abs(z) > config.coincidence_threshold
        if flagged:
            logger.warning('Coincidence monitor flagged: %d double clicks, %.2f expected (z=%.2f)',
                           observed, expected, z)
        return MonitorVerdict(
            flagged=flagged,
            statistic=abs(z),
            threshold=config.coincidence_threshold,
            window_count=windows,
            z_score=z,
            p_value=_two_sided_p(z),
            observed=float(observed),
            expected=float(expected),
        )
