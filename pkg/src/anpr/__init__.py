"""Number plate recognition toolkit: detection, OCR, and synthetic data."""

__version__ = "0.1.0"
