"""Learning-to-search dependency parsing."""

__version__ = "0.1.0"
