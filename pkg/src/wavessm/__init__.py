"""Diagonal state-space sequence models viewed as exactly solvable oscillator networks."""

__version__ = "0.1.0"
