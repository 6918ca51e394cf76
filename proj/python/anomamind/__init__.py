"""Coarse-to-fine, tool-driven time-series anomaly detection engine."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
