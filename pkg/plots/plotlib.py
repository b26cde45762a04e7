"""Shared helpers for the rendering scripts: CSV parsing and house styles.

These scripts consume only the engine's documented CSV formats (``#``-prefixed
metadata lines, then a header row); they never import the engine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# style roles follow the comparison-figure conventions used throughout
STYLE_ROLES = {
    "cmm": {"color": "magenta", "linestyle": "-"},
    "wmm-0.1": {"color": "purple", "linestyle": "-"},
    "wmm-0.05": {"color": "green", "linestyle": "-"},
    "ehrenfest": {"color": "cyan", "linestyle": "--"},
    "fssh": {"color": "orange", "linestyle": "--"},
    "exact": {"color": "black", "linestyle": "none", "marker": "o", "markersize": 3},
}


@dataclass
class SeriesData:
    x: np.ndarray
    columns: dict  # name -> values
    errors: dict  # name -> stderr (may be missing)
    metadata: dict = field(default_factory=dict)


def read_series_csv(path) -> SeriesData:
    """Parse the engine CSV format: '# key = value' lines, header, data rows."""
    metadata = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                metadata[key.strip()] = val.strip()
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    x = data[:, 0]
    columns = {}
    errors = {}
    for i, name in enumerate(header[1:], start=1):
        if name.endswith("_err"):
            errors[name[:-4]] = data[:, i]
        else:
            columns[name] = data[:, i]
    return SeriesData(x=x, columns=columns, errors=errors, metadata=metadata)


def style_for(role: str) -> dict:
    if role not in STYLE_ROLES:
        warnings.warn(f"unknown style role {role!r}; using defaults")
        return {}
    return dict(STYLE_ROLES[role])


def align_grids(x_ref: np.ndarray, x: np.ndarray, y: np.ndarray, resample: bool):
    """Return y on x_ref, resampling with a warning or raising per the flag."""
    if x.shape == x_ref.shape and np.allclose(x, x_ref):
        return y
    if not resample:
        raise ValueError("curve time grid does not match the panel grid "
                         "(pass resample=true in the recipe to interpolate)")
    warnings.warn("resampling curve onto the panel time grid")
    return np.interp(x_ref, x, y)


def save_png(fig, out_path) -> None:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps re-renders byte-stable
    fig.savefig(out, dpi=130, metadata={"Software": "plots"})
