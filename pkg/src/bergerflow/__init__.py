"""Warped Berger Ricci flow on R^4: geometry, initial data, flow, diagnostics."""

__version__ = "0.1.0"
