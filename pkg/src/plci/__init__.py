"""Conditional independence in probabilistic logic programs via d-separation."""

__version__ = "0.1.0"
