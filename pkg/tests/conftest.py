import pytest

from wickstar.chart import load_chart
from wickstar.expr import parse as parse_expr

from importlib import resources


def bundled(name):
    text = resources.files("wickstar").joinpath(f"charts/{name}.json").read_text()
    return load_chart(text)


@pytest.fixture(scope="session")
def c1_flat():
    return bundled("c1_flat")


@pytest.fixture(scope="session")
def c2_flat():
    return bundled("c2_flat")


@pytest.fixture(scope="session")
def c2_flat_omega20():
    return bundled("c2_flat_omega20")


@pytest.fixture(scope="session")
def disk():
    return bundled("disk")


@pytest.fixture(scope="session")
def disk_omega_nu():
    return bundled("disk_omega_nu")


@pytest.fixture(scope="session")
def disk_omega_inu():
    return bundled("disk_omega_inu")


@pytest.fixture(scope="session")
def cp1():
    return bundled("cp1")


@pytest.fixture(scope="session")
def cp1_omega_nu():
    return bundled("cp1_omega_nu")


@pytest.fixture
def p1():
    """Parser for 1-dimensional chart expressions."""
    return lambda text: parse_expr(text, 1)


@pytest.fixture
def p2():
    return lambda text: parse_expr(text, 2)
