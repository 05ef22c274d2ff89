"""Figure rendering for the waveguide collective-emission simulator CSVs."""

__version__ = "0.1.0"

from .figures import KINDS, FigureSpec, RenderError, render
