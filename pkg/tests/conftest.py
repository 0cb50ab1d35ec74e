import numpy as np
import pytest

from proplace import ReluNetwork


@pytest.fixture
def tiny_net():
    """1 -> 1 -> 1 identity-then-shift net: logit(x) = relu(x) - 1."""
    return ReluNetwork(
        [np.array([[1.0]]), np.array([[1.0]])],
        [np.array([0.0]), np.array([-1.0])],
    )


@pytest.fixture
def two_feature_net():
    """Hand-traceable 2 -> 2 -> 1 net with one clamped hidden unit at the
    reference input (1, 0.5)."""
    return ReluNetwork(
        [np.array([[1.0, -1.0], [0.5, 0.5]]), np.array([[1.0, -2.0]])],
        [np.array([0.0, -1.0]), np.array([0.25])],
    )
