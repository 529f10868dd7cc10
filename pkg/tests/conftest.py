import numpy as np
import pytest
from hypothesis import settings

from cebed.data import ScenarioFamily, generate, split

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_family():
    return ScenarioFamily(snr_domains=(0.0, 10.0, 20.0), speed_domains=(5.0,))


@pytest.fixture(scope="session")
def small_dataset(small_family):
    ds = generate(small_family, 120, master_seed=11)
    split(ds, 11)
    return ds


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
