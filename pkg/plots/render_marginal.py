#!/usr/bin/env python3
"""Render marginal-distribution heatmaps from engine grid CSVs.

Usage: python render_marginal.py --grid m.csv [--grid m2.csv ...] --out fig.png

Each grid CSV carries '# gamma-scheme = ...' metadata; the support disc
boundary is drawn from it (both discs for the weighted two-point scheme).
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parent))
from plotlib import save_png  # noqa: E402


def read_grid_csv(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
                continue
            if line.startswith("x1,"):
                continue
            rows.append([float(v) for v in line.split(",")])
    data = np.asarray(rows)
    a1 = np.unique(data[:, 0])
    a2 = np.unique(data[:, 1])
    values = data[:, 2].reshape(a1.size, a2.size)
    return a1, a2, values, meta


def support_radii(meta: dict) -> list[float]:
    scheme = meta.get("gamma-scheme", "")
    m = re.match(r"single\(([-0-9.e]+)\)", scheme)
    if m:
        gamma = float(m.group(1))
        return [math.sqrt(2.0 * (1.0 + 2.0 * gamma))]
    m = re.match(r"pair\(delta=([-0-9.e]+)\)", scheme)
    if m:
        delta = float(m.group(1))
        return [
            math.sqrt(2.0 * (1.0 + 2.0 * delta)),
            math.sqrt(2.0 * (1.0 - 2.0 * delta)),
        ]
    return []


def render(paths, out, scaled: bool = False):
    n = len(paths)
    fig, axes = plt.subplots(1, n, figsize=(4.4 * n, 4.0), squeeze=False)
    for ax, path in zip(axes[0], paths):
        a1, a2, values, meta = read_grid_csv(path)
        radii = support_radii(meta)
        scale = max(radii) if (scaled and radii) else 1.0
        extent = [a1[0] / scale, a1[-1] / scale, a2[0] / scale, a2[-1] / scale]
        vmax = np.max(np.abs(values)) or 1.0
        im = ax.imshow(
            values.T, origin="lower", extent=extent, cmap="RdBu_r",
            vmin=-vmax, vmax=vmax, interpolation="nearest",
        )
        theta = np.linspace(0, 2 * math.pi, 200)
        for r in radii:
            ax.plot(r / scale * np.cos(theta), r / scale * np.sin(theta),
                    color="black", linewidth=0.8, linestyle=":")
        ax.set_title(f"entry ({meta.get('nm-pair', '?')})  {meta.get('gamma-scheme', '')}",
                     fontsize=9)
        ax.set_xlabel("x1 (scaled)" if scaled else "x1")
        ax.set_ylabel("x2 (scaled)" if scaled else "x2")
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    save_png(fig, out)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", action="append", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--scaled", action="store_true",
                        help="scale coordinates by the larger support radius")
    args = parser.parse_args(argv)
    render(args.grid, args.out, scaled=args.scaled)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
