"""Cascaded degenerate OPO + SHG cavity: steady states, positive-P dynamics and output correlations."""

__version__ = "0.1.0"
