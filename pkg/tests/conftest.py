import pytest

from edgefl.registry import RegistryServer


@pytest.fixture
def registry():
    with RegistryServer(port=0) as srv:
        yield srv
