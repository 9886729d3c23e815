"""Panel plots for dose-response curve and band JSON from the npdose CLI."""

__version__ = "0.1.0"

from .render import FigureSpec, SchemaError, load_payload, render

__all__ = ["FigureSpec", "SchemaError", "load_payload", "render"]
