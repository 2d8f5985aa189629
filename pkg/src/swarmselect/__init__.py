"""Joint MLP hyperparameter tuning and feature selection with a mixed binary/continuous PSO."""

__version__ = "0.1.0"
