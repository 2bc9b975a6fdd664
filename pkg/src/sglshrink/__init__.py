"""Bayesian Poisson regression with spatially dependent global-local shrinkage."""

__version__ = "0.1.0"
