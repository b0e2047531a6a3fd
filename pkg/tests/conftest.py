import numpy as np
import pytest

from sinhgordon import validate_params


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full-scale acceptance criteria (minutes, run by default)")


@pytest.fixture
def unit_params():
    return validate_params(1.0, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def combined_se(*ses) -> float:
    return float(np.sqrt(sum(s * s for s in ses)))


def agree(a, se_a, b, se_b, n_sigma=3.0, slack=0.0) -> bool:
    return abs(a - b) <= n_sigma * combined_se(se_a, se_b) + slack
