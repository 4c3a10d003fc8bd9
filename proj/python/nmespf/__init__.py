"""Predictor-feedback tracking toolkit for input-delayed joint models."""

from ._core import ConfigError, EnvelopeError, Scenario, fit_decay_rate

__all__ = ["Scenario", "fit_decay_rate", "ConfigError", "EnvelopeError"]
