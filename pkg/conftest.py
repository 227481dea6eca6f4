"""Run the Django test suite under pytest the way manage.py test would."""
import os

import django
import pytest

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'linescan_anomaly.settings')
django.setup()


def pytest_collection_modifyitems(config, items):
    # Mirror LinescanTestRunner: skip @tag('acceptance') tests unless enabled.
    from django.conf import settings
    if settings.RUN_ACCEPTANCE_TESTS:
        return
    skip = pytest.mark.skip(reason='acceptance test; set HSI_RUN_ACCEPTANCE=True')
    for item in items:
        tags = getattr(getattr(item, 'cls', None), 'tags', set()) | \
            getattr(getattr(item, 'obj', None), 'tags', set())
        if 'acceptance' in tags:
            item.add_marker(skip)


@pytest.fixture(scope='session', autouse=True)
def django_test_environment():
    from django.test.utils import setup_databases, setup_test_environment, teardown_databases, \
        teardown_test_environment
    setup_test_environment()
    old_config = setup_databases(verbosity=0, interactive=False)
    yield
    teardown_databases(old_config, verbosity=0)
    teardown_test_environment()
