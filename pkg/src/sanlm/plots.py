"""Figure rendering for the report path (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import PositionErrorHistogram  # noqa: E402

# Keep output bytes independent of the environment.
_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "sanlm"}}


def render_wer_bars(rows: list[tuple[str, float]], path) -> None:
    """Bar chart of corpus WER per condition (e.g. baseline vs oracle)."""
    labels = [name for name, _ in rows]
    values = [100.0 * v for _, v in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(labels, values, color="#4878a8")
    ax.set_ylabel("WER (%)")
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.2f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_position_histogram(hists: dict[str, PositionErrorHistogram],
                              path) -> None:
    """Error count by hypothesis word position, one series per condition."""
    fig, ax = plt.subplots(figsize=(6, 3.2))
    max_pos = max((max(h.counts) for h in hists.values() if h.counts),
                  default=0)
    positions = list(range(max_pos + 1))
    for name, hist in sorted(hists.items()):
        ax.plot(positions, [hist.counts.get(p, 0) for p in positions],
                marker="o", markersize=3, label=name)
    ax.set_xlabel("word position in hypothesis")
    ax.set_ylabel("error count")
    if hists:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
