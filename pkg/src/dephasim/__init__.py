"""Exact and approximate dephasing of a qubit in a squeezed thermal bosonic bath."""

__version__ = "0.1.0"
