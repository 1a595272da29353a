"""Panel figures from simulation frame CSV directories."""

from .frames import FrameDiscoveryError, FrameSet, load_values, parse_header
from .render import compose_panels, panel_grid, render_panels, select_frames

__version__ = "0.1.0"

__all__ = [
    "FrameDiscoveryError",
    "FrameSet",
    "compose_panels",
    "load_values",
    "panel_grid",
    "parse_header",
    "render_panels",
    "select_frames",
]
