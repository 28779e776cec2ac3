"""Construction laboratory for divergent products of three orthogonal projections."""

__version__ = "0.1.0"
