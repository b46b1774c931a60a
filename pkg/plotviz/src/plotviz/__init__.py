"""Figure rendering for sweep CSV outputs."""

from .render import (
    CurveSpec,
    PlotSpec,
    SchemaError,
    axis_is_log,
    extract_curves,
    load_plot_spec,
    render,
)

__all__ = [
    "CurveSpec",
    "PlotSpec",
    "SchemaError",
    "axis_is_log",
    "extract_curves",
    "load_plot_spec",
    "render",
]

__version__ = "0.1.0"
