"""Figure rendering for the report-producing CLI paths.

Figures are rendered headless to files next to the delimited output; the CSV
stays the canonical artifact and these charts are a convenience view of it.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

PathLike = Union[str, Path]

_BAR_KW = {"edgecolor": "black", "linewidth": 0.4}


def plot_cost_sweep(rows: Sequence[dict], axis: str, path: PathLike) -> None:
    """Grouped bars of organization gate totals across the swept axis."""
    labels = [str(r[axis]) for r in rows]
    mac = [float(r["mac_total"]) for r in rows]
    pasm = [float(r["pasm_total"]) for r in rows]
    x = range(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar([i - width / 2 for i in x], mac, width, label="16-mac", **_BAR_KW)
    ax.bar([i + width / 2 for i in x], pasm, width, label="16-pas-4-mac", **_BAR_KW)
    ax.set_xticks(list(x), labels)
    ax.set_xlabel("bit width w" if axis == "w" else "weight bins b")
    ax.set_ylabel("gate count (NAND2-equivalent)")
    ax.set_title("Organization gate totals (lower is better)")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cycle_report(rows: Sequence[dict], path: PathLike) -> None:
    """Stacked accumulate/post-pass cycle bars, one bar per report row."""
    labels = [f"{r['mode']}\nb={r['b']}" for r in rows]
    acc = [int(r["acc_cycles"]) for r in rows]
    post = [int(r["post_cycles"]) for r in rows]
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(x, acc, 0.55, label="accumulate", **_BAR_KW)
    ax.bar(x, post, 0.55, bottom=acc, label="post-pass", **_BAR_KW)
    ax.set_xticks(list(x), labels)
    ax.set_ylabel("cycles")
    ax.set_title("Cycle breakdown")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
