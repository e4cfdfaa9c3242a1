"""Numerical laboratory for maximum principles of nonlocal elliptic operators."""

__version__ = "0.1.0"
