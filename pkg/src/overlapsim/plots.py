"""Figure rendering for the report-producing CLI commands.

Figures are written next to the delimited output with a deterministic layout
so repeated runs produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_depth_sweep_figure(
    rows: list[dict], depth_labels: list[str], path: str | Path
) -> None:
    """Log-log transfer time vs payload size, one line per depth column."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    sizes = [row["size_bytes"] for row in rows]
    for label in depth_labels:
        style = {"linestyle": "--", "marker": "s"} if label == "adaptive" else {"marker": "o"}
        ax.plot(sizes, [row[label] for row in rows], label=label, markersize=3.5, **style)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("payload size (bytes)")
    ax.set_ylabel("collective time (us)")
    ax.legend(title="depth", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_scenario_figure(rows: list[tuple[str, dict]], path: str | Path) -> None:
    """Iteration time bars plus overlap coefficient per scenario."""
    names = [name for name, _ in rows]
    t_ms = [m["T_us"] / 1000.0 for _, m in rows]
    alphas = [m["alpha"] for _, m in rows]

    fig, (ax_t, ax_a) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    xs = range(len(names))
    ax_t.bar(xs, t_ms, color="tab:blue")
    ax_t.set_ylabel("iteration time (ms)")
    ax_a.bar(xs, alphas, color="tab:orange")
    ax_a.set_ylabel("overlap coefficient")
    ax_a.set_ylim(0, 1.05)
    for ax in (ax_t, ax_a):
        ax.set_xticks(list(xs))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
