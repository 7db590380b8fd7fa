"""Deterministic SVG renderings of the report tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {"svg.hashsalt": "dyadsense", "svg.fonttype": "none", "font.size": 9}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def survival_svg(x, s, path, xlabel, title, logx=True, cutoff=None):
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        x = np.asarray(x, dtype=float)
        if logx:
            keep = x > 0
            ax.step(x[keep], np.asarray(s)[keep], where="post", lw=1.2)
            ax.set_xscale("log")
        else:
            ax.step(x, s, where="post", lw=1.2)
        if cutoff is not None:
            ax.axvline(cutoff, color="grey", ls="--", lw=0.8)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("fraction exceeding")
        ax.set_ylim(0, 1.02)
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def heatmap_svg(df, path, title):
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 6))
        im = ax.imshow(df.to_numpy(dtype=float), vmin=0, vmax=max(1e-9, float(np.nanmax(df.to_numpy()))),
                       cmap="viridis")
        ax.set_xticks(range(len(df.columns)), df.columns, rotation=90, fontsize=6)
        ax.set_yticks(range(len(df.index)), df.index, fontsize=6)
        fig.colorbar(im, ax=ax, fraction=0.046)
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def profile_svg(df, path, title):
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for cls, sub in df.groupby("tie_class", sort=False):
            ax.plot(sub["week"], sub["median_distance_m"], marker="o", ms=3, label=cls)
        ax.set_xlabel("week")
        ax.set_ylabel("median distance (m)")
        ax.legend(frameon=False)
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
