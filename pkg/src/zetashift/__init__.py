"""Numerical laboratory for shifted moments of the Riemann zeta function
and their random-matrix analogues."""

__version__ = "0.1.0"
