"""Figure rendering for bidiagonalization diagnostic CSV bundles."""

from .render import FigureSpec, render

__version__ = "0.1.0"
