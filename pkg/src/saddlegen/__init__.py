"""Generalization experiments for empirical solutions of stochastic saddle-point problems."""

__version__ = "0.1.0"
