"""Numerical potential theory for subordinate Brownian motions."""

__version__ = "0.1.0"

from .bernstein import BernsteinFamily, Kind, SubordinatorModel  # noqa: E402,F401
from .report import VerificationReport  # noqa: E402,F401
