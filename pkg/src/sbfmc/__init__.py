"""Multicast stochastic beamforming: achievable-rate formulas with
independent quadrature and Monte Carlo oracles, seeded samplers, a max-min
covariance solver and a symbol-level link simulator."""

from . import backend, capacity, gainlaws, hypoexp, linksim, rates, sampling, specfun

__version__ = "0.1.0"

__all__ = [
    "backend",
    "capacity",
    "gainlaws",
    "hypoexp",
    "linksim",
    "rates",
    "sampling",
    "specfun",
]
