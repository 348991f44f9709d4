"""Trotterized lattice-model simulation with noise emulation and error mitigation."""

__version__ = "0.1.0"
