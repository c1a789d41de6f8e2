import numpy as np
import pytest

from mac_discretization import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20190521)


@pytest.fixture(params=[4, 8, 16], ids=lambda n: f"n{n}")
def grid(request):
    return GridSpec(request.param)


@pytest.fixture
def clean_env(monkeypatch):
    """No layered configuration leaks in from the environment."""
    monkeypatch.delenv("task_parameters", raising=False)
    monkeypatch.delenv("MGSTOKES_LOG_LEVEL", raising=False)
    return monkeypatch
