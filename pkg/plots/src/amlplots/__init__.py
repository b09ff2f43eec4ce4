"""Figure regeneration for sphere mean-field attention runs."""

from .figures import KINDS, FigureSpec, build_figure, render
from .schemas import SchemaError

__version__ = "0.1.0"
