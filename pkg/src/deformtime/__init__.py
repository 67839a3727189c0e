"""Deformable-attention forecaster for one target series with exogenous predictors."""

__version__ = "0.1.0"
