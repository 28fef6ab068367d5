# filename: conftest.py
import os
import sys

import pytest

# Add the project root directory to the Python path
# so that modules like 'bounds', 'kernels', etc. import the same way in tests
project_root = os.path.abspath(os.path.dirname(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the acceptance-scale Monte-Carlo tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale simulation, skipped unless --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def captured_logs(caplog):
    """caplog for the package loggers, which do not propagate to the root logger."""
    import logger as package_logger
    for named in package_logger._loggers.values():
        named.addHandler(caplog.handler)
    caplog.set_level("DEBUG")
    yield caplog
    for named in package_logger._loggers.values():
        named.removeHandler(caplog.handler)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240601)
