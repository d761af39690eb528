"""Regenerate figure-style images from hflow sweep output directories."""

__version__ = "0.1.0"

from .errors import EmptyInput, SchemaMismatch  # noqa: F401
from .render import PlotSpec, render  # noqa: F401
