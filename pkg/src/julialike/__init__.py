"""Numerical estimates of Fatou-like and Julia-like sets of families of holomorphic functions."""

__version__ = "0.1.0"
