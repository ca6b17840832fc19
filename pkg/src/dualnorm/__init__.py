"""Small CPU-only laboratory for instance + feature normalization in a
configurable inverted-residual CNN, with synthetic multi-domain retrieval
benchmarks. See README.md for the command-line workflow."""

__version__ = "0.1.0"
