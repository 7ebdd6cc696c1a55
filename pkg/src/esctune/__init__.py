"""Early-stopping checks for budget-aware index tuning on a synthetic what-if oracle."""

__version__ = "0.1.0"
