"""Numerical laboratory for invariant half-flat structures on S3 x S3 and
the matrix flow producing cohomogeneity-one special-holonomy metrics."""

__version__ = "0.1.0"

from .errors import HFlowError  # noqa: F401
