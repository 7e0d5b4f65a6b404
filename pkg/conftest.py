import os
import random
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from sclkit.engines.actions import GraphAction  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run exhaustive acceptance-scale tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: exhaustive acceptance-scale runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rank2():
    return GraphAction.cayley(2)


@pytest.fixture
def rank3():
    return GraphAction.cayley(3)


@pytest.fixture
def rng():
    return random.Random(0)


@pytest.fixture
def info_dir():
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "sclkit", "info")
