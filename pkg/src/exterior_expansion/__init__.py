"""Radial solutions, expansions at infinity and verification oracles for F_tau(lambda(D^2 u)) = C0."""

__version__ = "0.1.0"
