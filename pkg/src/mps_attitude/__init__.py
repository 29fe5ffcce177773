"""Quaternion attitude control with model predictive selection of the error-quaternion equilibrium."""

__version__ = "0.1.0"
