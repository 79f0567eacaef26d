"""
Test helpers shared by the pymmog test suites.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import os
import logging

_log_level = os.environ.get('PYMMOG_TEST_LOG')
if _log_level:
    logging.basicConfig(level=getattr(logging, _log_level.upper(), logging.INFO))


def get_envval(evnm, default=None):
    """Return a a non-empty environment variable value.

    If the value is unset or empty, return default.
    """
    if os.environ.get(evnm):
        return os.environ[evnm]
    return default


def huge_tests_enabled():
    """Return True when the long scenario runs were requested."""
    return get_envval('MMOG_HUGE_TESTS', 'false').lower() in ('1', 'true', 'yes')


try:
    from hypothesis import settings

    settings.register_profile('mmog', deadline=None)
    settings.register_profile('mmog-huge', max_examples=2000, deadline=None)
    settings.load_profile('mmog-huge' if huge_tests_enabled() else 'mmog')
except ImportError:
    pass
