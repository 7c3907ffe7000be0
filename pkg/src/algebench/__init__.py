"""Finite-algebra workbench for equational consequence, interpolation and
canonical extensions of finite posets."""

__version__ = "0.1.0"
