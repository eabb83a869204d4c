"""Demand-aware customized multi-agent communication under bandwidth budgets."""

__version__ = "0.1.0"
