"""Numerical toolkit for nonlinear Poincare inequalities, barycenters and random-group walks."""

__version__ = "0.1.0"
