"""cfolab: carrier frequency offset estimation workbench.

Synthesizes single-carrier bursts with known frequency offset, estimates
the offset with classical non-data-aided estimators and a residual
convolutional regressor, and orchestrates reproducible comparison
experiments.
"""

from . import dataset, estimators, harness, metrics, neuralnet, waveform
from .errors import DivergenceError, FormatError

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "FormatError",
    "dataset",
    "estimators",
    "harness",
    "metrics",
    "neuralnet",
    "waveform",
    "__version__",
]
