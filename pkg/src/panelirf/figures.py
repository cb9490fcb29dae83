"""Matplotlib renderers for the report figures.

Every figure is written as SVG next to a CSV carrying exactly the plotted
series; figures are derived views of the delimited output, never the only
record.  The SVG hash salt and date metadata are pinned so identical runs
produce identical bytes.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .inference import BAND_NONE, BAND_STRONG, BAND_WEAK

matplotlib.rcParams["svg.hashsalt"] = "panelirf"

_BAND_COLORS = {
    BAND_NONE: "#ffffff",
    BAND_WEAK: "#ffff80",
    BAND_STRONG: "#80ff80",
}
_SCALE_COLORS = ("magenta", "orange", "red", "green", "blue")


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _grid(outcomes: Sequence[str], shocks: Sequence[str]):
    fig, axes = plt.subplots(
        len(outcomes),
        len(shocks),
        figsize=(3.2 * len(shocks), 2.2 * len(outcomes)),
        squeeze=False,
        sharex=True,
    )
    for j, shock in enumerate(shocks):
        axes[0][j].set_title(shock)
    for i, outcome in enumerate(outcomes):
        axes[i][0].set_ylabel(outcome, fontsize=9)
    return fig, axes


def save_irf_grid(
    frame: pd.DataFrame,
    path,
    outcomes: Sequence[str],
    shocks: Sequence[str],
    series: Sequence[tuple[str, str, str]],
) -> None:
    """5x3-style grid of IRF lines.

    ``frame`` is long-form with columns outcome, shock, h plus one column
    per plotted series; ``series`` lists (column, color, label) triples.
    """
    fig, axes = _grid(outcomes, shocks)
    for i, outcome in enumerate(outcomes):
        for j, shock in enumerate(shocks):
            ax = axes[i][j]
            cell = frame[(frame["outcome"] == outcome) & (frame["shock"] == shock)]
            cell = cell.sort_values("h")
            for column, color, label in series:
                ax.plot(cell["h"], cell[column], color=color, linewidth=1.2, label=label)
            ax.axhline(0.0, color="black", linewidth=0.6)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if labels:
        fig.legend(handles, labels, loc="lower center", ncol=len(labels), frameon=False)
    fig.tight_layout(rect=(0, 0.04, 1, 1))
    _save(fig, path)


def save_banded_irf_grid(
    frame: pd.DataFrame,
    path,
    outcomes: Sequence[str],
    shocks: Sequence[str],
    value_column: str = "value",
    se_column: str = "se",
) -> None:
    """IRF grid with one-sd and 90 percent bands around a single line."""
    fig, axes = _grid(outcomes, shocks)
    for i, outcome in enumerate(outcomes):
        for j, shock in enumerate(shocks):
            ax = axes[i][j]
            cell = frame[(frame["outcome"] == outcome) & (frame["shock"] == shock)]
            cell = cell.sort_values("h")
            v = cell[value_column].to_numpy()
            s = cell[se_column].to_numpy()
            h = cell["h"].to_numpy()
            ax.fill_between(h, v - 1.645 * s, v + 1.645 * s, color="#bcd9f5", linewidth=0)
            ax.fill_between(h, v - s, v + s, color="#5b9bd5", alpha=0.6, linewidth=0)
            ax.plot(h, v, color="#1f3864", linewidth=1.2)
            ax.axhline(0.0, color="black", linewidth=0.6)
    fig.tight_layout()
    _save(fig, path)


def save_scaled_family_grid(
    frame: pd.DataFrame,
    path,
    outcomes: Sequence[str],
    shocks: Sequence[str],
    scales: Sequence[float],
) -> None:
    """One line per shock scale, colored in the conventional order."""
    fig, axes = _grid(outcomes, shocks)
    for i, outcome in enumerate(outcomes):
        for j, shock in enumerate(shocks):
            ax = axes[i][j]
            cell = frame[(frame["outcome"] == outcome) & (frame["shock"] == shock)]
            for color, a in zip(_SCALE_COLORS, scales):
                sub = cell[cell["scale"] == a].sort_values("h")
                ax.plot(sub["h"], sub["value"], color=color, linewidth=1.1, label=f"{a:g} sd")
            ax.axhline(0.0, color="black", linewidth=0.6)
    handles, labels = axes[0][0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncol=len(scales), frameon=False)
    fig.tight_layout(rect=(0, 0.04, 1, 1))
    _save(fig, path)


def save_histograms(
    values_by_kind: Mapping[str, np.ndarray], path, bins: int = 30
) -> pd.DataFrame:
    """Side-by-side shock histograms; returns the binned data for the CSV."""
    kinds = list(values_by_kind)
    fig, axes = plt.subplots(1, len(kinds), figsize=(3.4 * len(kinds), 2.8), squeeze=False)
    records = []
    for ax, kind in zip(axes[0], kinds):
        x = np.asarray(values_by_kind[kind], dtype=float)
        counts, edges, _ = ax.hist(x, bins=bins, color="#5b9bd5", edgecolor="white")
        ax.set_title(kind)
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            records.append({"shock": kind, "bin_left": lo, "bin_right": hi, "count": int(c)})
    fig.tight_layout()
    _save(fig, path)
    return pd.DataFrame.from_records(records)


def save_significance_table(
    table: pd.DataFrame,
    path,
    outcomes: Sequence[str],
    shocks: Sequence[str],
    title: str = "",
) -> None:
    """Color-celled significance grid mirroring the banded tables."""
    horizons = sorted(table["h"].unique())
    n_rows = len(outcomes) * len(shocks)
    fig, ax = plt.subplots(figsize=(0.32 * len(horizons) + 2.4, 0.24 * n_rows + 1.2))
    ax.set_xlim(0, len(horizons))
    ax.set_ylim(0, n_rows)
    ax.invert_yaxis()
    lookup = {
        (rec.outcome, rec.shock, rec.h): rec.band for rec in table.itertuples(index=False)
    }
    labels = []
    for i, outcome in enumerate(outcomes):
        for k, shock in enumerate(shocks):
            row = i * len(shocks) + k
            labels.append(f"{outcome} / {shock}")
            for j, h in enumerate(horizons):
                band = lookup[(outcome, shock, h)]
                ax.add_patch(
                    plt.Rectangle(
                        (j, row), 1, 1, facecolor=_BAND_COLORS[band],
                        edgecolor="#bbbbbb", linewidth=0.4,
                    )
                )
    ax.set_yticks(np.arange(n_rows) + 0.5)
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xticks(np.arange(len(horizons)) + 0.5)
    ax.set_xticklabels([str(h) for h in horizons], fontsize=7)
    ax.set_xlabel("horizon")
    if title:
        ax.set_title(title, fontsize=9)
    ax.tick_params(length=0)
    fig.tight_layout()
    _save(fig, path)
