"""High-order ALE WENO finite-volume solver for compressible two-phase flow."""

__version__ = "0.1.0"
