"""Detect computational diversity between program variants by amplifying a unit-test suite."""

__version__ = "0.1.0"
