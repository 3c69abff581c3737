"""Vacuum-noise QRNG post-processing: simulation, characterization,
min-entropy estimation, Toeplitz extraction and statistical testing."""

from ._core import *  # noqa: F401,F403
from ._core import VqrngError  # noqa: F401

__version__ = "0.1.0"
