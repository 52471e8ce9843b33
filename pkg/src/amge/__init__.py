"""Element-based algebraic multigrid for discrete de Rham sequences."""

__version__ = "0.1.0"
