"""Graph-based multivariate time series classification benchmark engine."""

__version__ = "0.1.0"
