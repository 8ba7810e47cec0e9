import pytest

from fpmb import PRESETS, preset_solution


@pytest.fixture(scope="session")
def built_presets():
    """Every named preset built once for the whole run."""
    return {name: preset_solution(name) for name in PRESETS}
