"""Optical-flow image registration with entropic W^{1,inf} regularization."""

__version__ = "0.1.0"
