"""refinekit: proof search, finite countermodels and refinement
certificates for many-sorted k-dimensional deductive systems."""

__version__ = "0.1.0"
