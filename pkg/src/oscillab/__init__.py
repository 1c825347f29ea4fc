"""Numerical laboratory for G_n = SL(2,R) x H^n: group arithmetic, principal-value
distributions, induced representations and singular oscillatory integral operators."""

__version__ = "0.1.0"
