"""External ray atlas for polynomials with disconnected Julia sets."""

__version__ = "0.1.0"
