"""Online greedy sparse linear discriminant classifiers and a cascade detector."""

__version__ = "0.1.0"
