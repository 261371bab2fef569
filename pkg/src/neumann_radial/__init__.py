"""Radial solutions of Neumann problems for semilinear equations on balls."""

__version__ = "0.1.0"
