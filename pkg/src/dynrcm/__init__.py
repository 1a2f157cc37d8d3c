"""Variable-speed random walks among degenerate time-dependent conductances on Z^d:
environments, weights, norms, heat solvers, correctors and inequality checks."""

__version__ = "0.1.0"
