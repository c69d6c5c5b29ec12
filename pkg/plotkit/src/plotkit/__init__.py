"""Figure rendering for the streaming filter's output files."""

from .figures import KINDS, PlotSpec, build_figure, render
from .io import PlotDataError

__all__ = ["KINDS", "PlotSpec", "PlotDataError", "build_figure", "render"]
