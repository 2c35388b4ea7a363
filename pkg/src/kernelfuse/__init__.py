"""Kernel regression with a learned shape matrix and eigen feature reduction."""

__version__ = "0.1.0"
