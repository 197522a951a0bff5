"""Fitting hidden-layer dynamical models with nonparametric information objectives."""

__version__ = "0.1.0"
