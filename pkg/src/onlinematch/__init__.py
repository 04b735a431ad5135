"""Fractional online matching with history-based pricing.

Simulators for the fully online and general vertex arrival models, the
factor-revealing LPs that produce price grids, and the hard instances that
bound every algorithm.
"""

__version__ = "0.1.0"
