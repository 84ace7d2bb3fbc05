import pathlib

import pytest

from cimeval import parse_arch, parse_mapping, parse_workload

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


@pytest.fixture()
def crossbar_arch():
    return parse_arch(read_fixture("arch_crossbar.yaml"))


@pytest.fixture()
def tiny_layer():
    return parse_workload(read_fixture("workload_tiny.yaml"))[0]


@pytest.fixture()
def tiny_mapping():
    return parse_mapping(read_fixture("mapping_tiny.yaml"))
