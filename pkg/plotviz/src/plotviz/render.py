"""Figure rendering from sweep CSV files.

A plot spec (TOML or dict) lists curves, each backed by CSV columns:

    output = "fig.png"
    ylabel = "Generalization Error"
    [[curves]]
    label = "d/n = 1/2"
    theory_csv = "regression_n100_d50_k3_theory.csv"   # solid line
    exp_csv = "regression_n100_d50_k3_exp.csv"         # marks + error bars
    y = "gen"
    yerr = "genstd"

A curve may instead name a single `csv` (drawn as a marked line, the
classification-file style).  The x column defaults to "lam" and the x axis
is always logarithmic.  Rendering is a pure function of the CSV contents:
no model quantity is recomputed here, and saved files carry no timestamps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["PlotSpec", "CurveSpec", "SchemaError", "load_plot_spec", "render", "extract_curves"]

_MARKERS = ["s", "^", "o", "D", "v", "P"]


class SchemaError(ValueError):
    """A referenced CSV is missing or lacks a required column."""


@dataclass
class CurveSpec:
    label: str
    y: str
    x: str = "lam"
    theory_csv: Optional[str] = None
    exp_csv: Optional[str] = None
    csv_path: Optional[str] = None
    yerr: Optional[str] = None
    color: Optional[str] = None

    def __post_init__(self):
        if not (self.theory_csv or self.exp_csv or self.csv_path):
            raise SchemaError(f"curve {self.label!r} names no CSV input")


@dataclass
class PlotSpec:
    output: str
    curves: list[CurveSpec]
    ylabel: str = "Error"
    xlabel: str = "lambda"
    title: Optional[str] = None
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        if not self.curves:
            raise SchemaError("plot spec has no curves")


def load_plot_spec(path: str | Path) -> PlotSpec:
    try:
        import tomllib
    except ModuleNotFoundError:  # pragma: no cover - 3.10 path
        import tomli as tomllib
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    curves = [
        CurveSpec(
            label=entry.get("label", f"curve {i}"),
            y=entry["y"],
            x=entry.get("x", "lam"),
            theory_csv=entry.get("theory_csv"),
            exp_csv=entry.get("exp_csv"),
            csv_path=entry.get("csv"),
            yerr=entry.get("yerr"),
            color=entry.get("color"),
        )
        for i, entry in enumerate(raw.get("curves", []))
    ]
    return PlotSpec(
        output=raw["output"],
        curves=curves,
        ylabel=raw.get("ylabel", "Error"),
        xlabel=raw.get("xlabel", "lambda"),
        title=raw.get("title"),
        base_dir=path.parent,
    )


def _read_columns(path: Path, columns: list[str]) -> list[list[float]]:
    if not path.exists():
        raise SchemaError(f"CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise SchemaError(
                    f"column {col!r} missing from {path.name} (has {header})"
                )
        rows = [[float(row[col]) for col in columns] for row in reader]
    return [list(col) for col in zip(*rows)] if rows else [[] for _ in columns]


def render(spec: PlotSpec | str | Path):
    """Draw the figure described by the spec and save it; returns the
    matplotlib Figure (its axes are the 'figure source' tests read back)."""
    if not isinstance(spec, PlotSpec):
        spec = load_plot_spec(spec)
    fig, ax = plt.subplots(figsize=(5.0, 3.6), constrained_layout=True)
    for idx, curve in enumerate(spec.curves):
        marker = _MARKERS[idx % len(_MARKERS)]
        color = curve.color or f"C{idx}"
        if curve.theory_csv:
            x, y = _read_columns(spec.base_dir / curve.theory_csv, [curve.x, curve.y])
            ax.plot(x, y, "-", color=color, label=curve.label, gid=f"theory:{curve.label}")
        if curve.exp_csv:
            cols = [curve.x, curve.y] + ([curve.yerr] if curve.yerr else [])
            data = _read_columns(spec.base_dir / curve.exp_csv, cols)
            yerr = data[2] if curve.yerr else None
            ax.errorbar(
                data[0], data[1], yerr=yerr, fmt=marker, color=color,
                markersize=4, linestyle="none", capsize=2,
                label=None if curve.theory_csv else curve.label,
                gid=f"experiment:{curve.label}",
            )
        if curve.csv_path:
            x, y = _read_columns(spec.base_dir / curve.csv_path, [curve.x, curve.y])
            ax.plot(
                x, y, "-", marker=marker, markersize=4, color=color,
                label=curve.label, gid=f"series:{curve.label}",
            )
    ax.set_xscale("log")
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best")
    out = spec.base_dir / spec.output
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if out.suffix == ".svg" else None
    fig.savefig(out, dpi=150, metadata=metadata)
    return fig


def extract_curves(fig) -> list[dict]:
    """Read the plotted data back from the figure source (not pixels).

    Returns one record per artist with a gid: kind, label, x, y, and yerr
    when the artist is an error-bar container.
    """
    ax = fig.axes[0]
    records = []
    for line in ax.lines:
        gid = line.get_gid()
        if not gid:
            continue
        kind, label = gid.split(":", 1)
        if kind == "experiment":
            continue  # error-bar data lines are read via their container
        records.append(
            {"kind": kind, "label": label,
             "x": list(line.get_xdata()), "y": list(line.get_ydata())}
        )
    for container in ax.containers:
        gid = container.get_gid() if hasattr(container, "get_gid") else None
        if gid is None and hasattr(container, "lines"):
            gid = container.lines[0].get_gid()
        if not gid:
            continue
        kind, label = gid.split(":", 1)
        data_line = container.lines[0]
        record = {
            "kind": kind,
            "label": label,
            "x": list(data_line.get_xdata()),
            "y": list(data_line.get_ydata()),
        }
        caplines, barcols = container.lines[1], container.lines[2]
        if barcols:
            segments = barcols[0].get_segments()
            record["yerr"] = [
                (seg[1][1] - seg[0][1]) / 2.0 for seg in segments
            ]
        del caplines
        records.append(record)
    return records


def axis_is_log(fig) -> bool:
    return fig.axes[0].get_xscale() == "log"
