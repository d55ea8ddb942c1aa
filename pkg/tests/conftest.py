import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from synthpass import data_dir
from synthpass.subjects import AssetPools, load_dictionaries
from synthpass.template import derive_empty_template, load_config

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TESTS = Path(__file__).resolve().parent
GOLDEN = TESTS / "golden" / "hashes.json"


def golden() -> dict:
    return json.loads(GOLDEN.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def data():
    return data_dir()


@pytest.fixture(scope="session")
def pol_config(data):
    return load_config(data / "pol" / "config.json")


@pytest.fixture(scope="session")
def pol_dicts(pol_config):
    return load_dictionaries(pol_config)


@pytest.fixture(scope="session")
def pol_pools(pol_config):
    return AssetPools.from_config(pol_config)


@pytest.fixture(scope="session")
def pol_template(pol_config):
    return derive_empty_template(pol_config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
