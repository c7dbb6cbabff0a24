"""Exponentially small separatrix splitting for a forced Hamiltonian-Hopf normal form."""

__version__ = "0.1.0"
