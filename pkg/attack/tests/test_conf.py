"""
Tests for the typed settings accessor.
"""
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from attack.conf import get_config
from attack.exceptions import OutOfRange


def with_threads(threads):
    return override_settings(QCA={**settings.QCA, 'THREADS': threads})


class ThreadsConfigTestCase(SimpleTestCase):
    """
    Test case for the THREADS setting fed by QCA_THREADS.
    """

    def test_text_value_parsed(self):
        """Test an environment-style string becomes an int."""
        with with_threads(' 3 '):
            config = get_config()
        self.assertEqual(config.threads, 3)
        self.assertEqual(config.workers, 3)

    def test_zero_means_auto(self):
        """Test 0 selects at least one worker."""
        with with_threads('0'):
            self.assertGreaterEqual(get_config().workers, 1)

    def test_invalid_values_rejected(self):
        """Test non-integers and negatives raise OutOfRange naming QCA_THREADS."""
        for threads in ('many', '', '1.5', '-1', -4):
            with with_threads(threads), self.assertRaises(OutOfRange, msg=repr(threads)) as ctx:
                get_config()
            self.assertEqual(ctx.exception.field, 'QCA_THREADS')
