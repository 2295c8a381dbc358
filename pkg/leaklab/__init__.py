"""leaklab: timing side-channel key recovery lab."""

__version__ = "0.1.0"
