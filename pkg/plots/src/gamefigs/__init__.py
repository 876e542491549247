"""Figure rendering for cancellable-put solver CSV output."""

from .render import render_curve, render_sweep

__version__ = "0.1.0"
