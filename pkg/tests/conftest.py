import pytest
from hypothesis import HealthCheck, settings

from mwref.group import BACKENDS, TransparentGroup, get_group

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=BACKENDS)
def group(request):
    return get_group(request.param)


@pytest.fixture
def transparent():
    return get_group("transparent")


@pytest.fixture
def toy():
    return get_group("toycurve")


@pytest.fixture
def z13():
    """The textbook instance: Z_13 with G = 1, H = 2."""
    return TransparentGroup(q=13, g=1, h=2)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
