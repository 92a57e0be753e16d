"""Closed-loop statistical verification with Gaussian-process surrogates."""
__version__ = "0.1.0"
