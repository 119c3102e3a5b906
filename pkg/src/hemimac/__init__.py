"""Many-access Gaussian MAC with a spherical codebook and a cap-filtered ML decoder."""

__version__ = "0.1.0"
