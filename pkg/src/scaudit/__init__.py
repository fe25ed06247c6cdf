"""scaudit: vulnerability assessment for Algorand and Solana smart contracts."""

__version__ = "0.1.0"
