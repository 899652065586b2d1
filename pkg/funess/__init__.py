"""Funessian process: kernels, exact statistics, sampling and the memory-driven walk."""

__version__ = "0.1.0"
