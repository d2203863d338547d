"""Thermoacoustic tomography by time reversal: forward simulation, reconstruction, diagnostics."""

__version__ = "0.1.0"
