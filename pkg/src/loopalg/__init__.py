"""Exact calculus on formal loop spaces: bihamiltonian structures of
hydrodynamic type, their deformations, and Miura equivalence."""

__version__ = "0.1.0"
