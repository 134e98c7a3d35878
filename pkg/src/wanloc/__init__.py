"""Maximally localized Wannier functions by gauge optimization on a k-grid."""

__version__ = "0.1.0"
