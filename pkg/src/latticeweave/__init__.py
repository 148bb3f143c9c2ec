"""Global-operation construction and verification of bipartite graph states
on two-species optical lattices."""

__version__ = "0.1.0"
