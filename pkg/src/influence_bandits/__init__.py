"""Contextual bandits for multi-round influence campaigns."""

from influence_bandits.linalg import ConfigError, DesignMatrix

__all__ = ["ConfigError", "DesignMatrix"]
__version__ = "0.1.0"
