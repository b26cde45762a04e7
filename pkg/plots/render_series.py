#!/usr/bin/env python3
"""Render multi-panel comparison figures from engine CSVs.

Usage: python render_series.py --recipe recipes/figure6_style.json

Recipe schema (JSON):
{
  "kind": "series" | "sweep",
  "output": "path.png",
  "x_label": "...", "y_label": "...",
  "resample": false,
  "panels": [
    {"title": "...",
     "curves": [{"csv": "...", "column": "D_1_0", "label": "CMM", "role": "cmm",
                 "x": "P0"  (sweep only)}]}
  ]
}
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parent))
from plotlib import align_grids, read_series_csv, save_png, style_for  # noqa: E402


def build_figure(recipe: dict, base_dir: Path):
    panels = recipe["panels"]
    n = len(panels)
    ncols = min(n, 2)
    nrows = math.ceil(n / ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(5.2 * ncols, 3.6 * nrows), squeeze=False
    )
    resample = bool(recipe.get("resample", False))
    for idx, panel in enumerate(panels):
        ax = axes[idx // ncols][idx % ncols]
        x_ref = None
        for curve in panel["curves"]:
            data = read_series_csv(base_dir / curve["csv"])
            x = data.x
            if "x" in curve:  # sweep panels index by a swept column
                x = data.columns[curve["x"]]
            column = curve["column"]
            if column not in data.columns:
                raise KeyError(f"{curve['csv']}: no column {column!r}")
            y = data.columns[column]
            if x_ref is None:
                x_ref = x
            else:
                y = align_grids(x_ref, x, y, resample)
                x = x_ref
            style = style_for(curve.get("role", ""))
            err = data.errors.get(column)
            if err is None:
                warnings.warn(f"{curve['csv']}: no stderr for {column}; bands omitted")
            elif style.get("linestyle") != "none":
                ax.fill_between(
                    x, y - err, y + err, alpha=0.25,
                    color=style.get("color", "gray"), linewidth=0,
                )
            ax.plot(x, y, label=curve["label"], **style)
        ax.set_title(panel.get("title", ""))
        ax.set_xlabel(recipe.get("x_label", "t"))
        ax.set_ylabel(recipe.get("y_label", ""))
        ax.legend(fontsize=8)
    for idx in range(n, nrows * ncols):
        axes[idx // ncols][idx % ncols].set_axis_off()
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--recipe", required=True)
    parser.add_argument("--out", help="override the recipe's output path")
    args = parser.parse_args(argv)
    recipe_path = Path(args.recipe)
    recipe = json.loads(recipe_path.read_text())
    base = recipe_path.parent
    fig = build_figure(recipe, base)
    out = Path(args.out) if args.out else base / recipe["output"]
    save_png(fig, out)
    plt.close(fig)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
