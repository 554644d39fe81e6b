"""Spectrally disentangled point-cloud VAE."""
__version__ = "0.1.0"
