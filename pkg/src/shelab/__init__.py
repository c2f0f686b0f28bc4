"""Monte Carlo lab for the stochastic heat equation driven by a Brownian sheet."""

__version__ = "0.1.0"
