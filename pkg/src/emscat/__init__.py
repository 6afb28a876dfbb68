"""Spectral surface-integral solver for electromagnetic scattering by
penetrable 3-D bodies."""

__version__ = "0.1.0"
