"""Numerical laboratory for lower bounds on nodal sets of Laplace eigenfunctions."""

__version__ = "0.1.0"
