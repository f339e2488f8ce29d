"""Boolean percolation on digraphs and the constant-decrement random exchange process."""

from .dist import DistributionSpec, TailModel, finite, geometric, parse, power_tail, two_point, uniform

__version__ = "0.1.0"

__all__ = [
    "DistributionSpec",
    "TailModel",
    "finite",
    "geometric",
    "parse",
    "power_tail",
    "two_point",
    "uniform",
]
