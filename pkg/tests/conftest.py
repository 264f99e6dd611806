"""Shared fixtures: kernel warmup and reference models used across files."""

import numpy as np
import pytest

from recomb import (
    Partition,
    PartitionIndex,
    RecombinationDistribution,
    TypeDistribution,
    TypeSpace,
)
from recomb import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile (or no-op) the hot kernels once so timings stay honest."""
    _kernels.warmup()


@pytest.fixture(scope="session")
def model3():
    """Three-site model: probability style, mu=1, all three two-block splits."""
    entries = {
        Partition.from_text("1|2,3"): 0.3,
        Partition.from_text("1,2|3"): 0.5,
        Partition.from_text("1,3|2"): 0.2,
    }
    return RecombinationDistribution.from_probabilities((1, 2, 3), 1.0, entries)


@pytest.fixture(scope="session")
def index3(model3):
    return PartitionIndex(model3.ground)


@pytest.fixture(scope="session")
def space3():
    return TypeSpace([2, 2, 2])


@pytest.fixture(scope="session")
def w0_3(space3):
    """Correlated three-site start: far from any product measure."""
    return TypeDistribution.from_pairs(
        space3, [((0, 0, 0), 0.55), ((1, 1, 1), 0.3), ((0, 1, 0), 0.15)]
    )


@pytest.fixture(scope="session")
def model2():
    """Two-site model: single split at unit rate."""
    return RecombinationDistribution.from_rates(
        (1, 2), {Partition.from_text("1|2"): 1.0}
    )


@pytest.fixture(scope="session")
def space2():
    return TypeSpace([2, 2])


@pytest.fixture(scope="session")
def w0_2(space2):
    """Fully linked two-site start: half 00, half 11."""
    return TypeDistribution.from_pairs(space2, [((0, 0), 0.5), ((1, 1), 0.5)])


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)
