import pytest

from helpers import build_fixed_network, fixed_params

from odscale.estimate import GroundTruth


@pytest.fixture
def network():
    return build_fixed_network()


@pytest.fixture
def params():
    return fixed_params()


@pytest.fixture
def ground_truth():
    return GroundTruth(
        travel_times={"P1": 600.0, "P2": 500.0, "P3": 130.0},
        weights={"P1": 1.0, "P2": 2.0, "P3": 0.5},
    )
