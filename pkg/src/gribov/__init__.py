"""Numerical toolkit for the cubic Reggeon field theory operators in Bargmann space."""

__version__ = "0.1.0"
