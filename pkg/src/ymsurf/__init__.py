"""Heat-kernel Yang-Mills measure on graphs in compact surfaces and Makeenko-Migdal checks."""

__version__ = "0.1.0"
