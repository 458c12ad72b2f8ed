"""Spectral analysis toolkit for massless Dirac operators with scalar potentials."""

__version__ = "0.1.0"
