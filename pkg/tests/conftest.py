import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_tone(cfo: float, length: int, phase: float = 0.0) -> np.ndarray:
    """Noiseless complex exponential at ``cfo`` cycles per sample."""
    n = np.arange(length)
    return np.exp(1j * (2.0 * np.pi * cfo * n + phase))
