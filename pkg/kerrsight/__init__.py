"""
kerrsight - Scattering and shape reconstruction for Kerr-type nonlinear media
"""

__version__ = "0.1.0"
