"""Variational-autoencoder evidence bounds with SVD-reduced Gaussian divergences."""
__version__ = "0.1.0"
