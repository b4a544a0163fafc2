import numpy as np
import pytest

from csps.example_data import worked_example_dataset


@pytest.fixture
def example():
    """The embedded 24-unit, 3-treatment, 4-cell dataset."""
    return worked_example_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
