"""Numerical laboratory for total-photon-number entanglement purification
of two-mode squeezed light."""

__version__ = "0.1.0"
