import pytest

from core_testutil import make_image

from devdiet.schedules import build_schedule_set


@pytest.fixture(scope="session")
def schedule():
    return build_schedule_set()


@pytest.fixture(scope="session")
def fixture_images():
    """The standing 20-image fixture used by regression and acceptance tests."""
    return [make_image(seed) for seed in range(20)]
