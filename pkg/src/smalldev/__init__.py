"""Chaining lower bounds for small deviation probabilities.

Gaussian and symmetric alpha-stable processes, with exact oracles and
Monte Carlo for sequence, sum-of-maxima and binary-tree examples.
"""

__version__ = "0.1.0"
