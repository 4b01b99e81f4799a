import pytest

from hopmap.graph import GraphConfig, build_map
from hopmap.simworld import generate_world, mapping_traverse, nav_benchmark_spec


@pytest.fixture(scope="session")
def nav_world():
    return generate_world(nav_benchmark_spec())


@pytest.fixture(scope="session")
def nav_frameset(nav_world):
    return mapping_traverse(nav_world, 30)


@pytest.fixture(scope="session")
def nav_map(nav_frameset):
    return build_map(nav_frameset, GraphConfig())
