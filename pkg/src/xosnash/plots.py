"""Figures for solve reports, benchmarks, and gadget gap tables.

All entry points render straight to a file (Agg backend; no display
needed) and return the path they wrote. Styling is kept minimal and
self-contained so figures are reproducible byte-for-byte-ish across runs
on the same stack.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .capped_welfare import IterationRecord  # noqa: E402
from .gadgets import GapReport  # noqa: E402


def plot_welfare_trajectory(
    records: Sequence[IterationRecord], path: str, n: Optional[int] = None
) -> str:
    """Capped welfare after each local-search turn, with the 1/sqrt(n) cap."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    xs = list(range(1, len(records) + 1))
    ys = [rec.welfare for rec in records]
    ax.plot(xs, ys, marker="o", ms=4, lw=1.2, color="#2a6f97")
    if n:
        ax.axhline(
            n ** 0.5, color="#c44536", lw=1.0, ls="--", label="n agents at cap"
        )
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("local-search turn")
    ax.set_ylabel("total capped welfare")
    ax.set_title("Capped-welfare trajectory")
    ax.grid(alpha=0.25, lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def plot_bench(rows: Sequence[dict], path: str) -> str:
    """Per-(instance, seed) solved NSW vs optimum ratio, grouped by instance."""
    fig, ax = plt.subplots(figsize=(7.0, 3.8))
    names = sorted({row["instance"] for row in rows})
    index = {name: i for i, name in enumerate(names)}
    xs, ys = [], []
    for row in rows:
        if row.get("ratio") is None:
            continue
        xs.append(index[row["instance"]])
        ys.append(row["ratio"])
    if xs:
        ax.scatter(xs, ys, s=18, alpha=0.75, color="#2a6f97", zorder=3)
    ax.axhline(1.0, color="#666", lw=0.8, ls=":")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("NSW(Q) / OPT")
    ax.set_title("Solver vs exact optimum")
    ax.grid(alpha=0.25, lw=0.5, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def plot_gap(report: GapReport, path: str) -> str:
    """Case-1 vs Case-2 NSW distribution against the equicovering bound."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    cases = ("intersecting", "disjoint")
    colors = {"intersecting": "#2a6f97", "disjoint": "#c44536"}
    for ci, case in enumerate(cases):
        ys = [row.gap for row in report.rows if row.case == case]
        xs = [ci + 0.08 * (i - len(ys) / 2) / max(1, len(ys)) for i in range(len(ys))]
        ax.scatter(xs, ys, s=20, alpha=0.8, color=colors[case], label=case)
    ax.axhline(
        report.bound_ratio,
        color="#444",
        lw=1.0,
        ls="--",
        label="disjoint-case bound",
    )
    ax.axhline(1.0, color="#999", lw=0.8, ls=":")
    ax.set_xticks(range(len(cases)))
    ax.set_xticklabels(cases)
    ax.set_ylabel("NSW / (m/n)")
    ax.set_title("Promise-case gap")
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.25, lw=0.5, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path
