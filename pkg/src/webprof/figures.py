"""Figure rendering for the report paths.

Every report CSV has a figure twin rendered next to it: novelty curves,
the acceptance confusion matrix, the window-geometry grid and the host
identification timeline. Rendering is headless (Agg) and byte-deterministic
for fixed inputs, so figures participate in the reproducibility contract.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import AcceptanceReport, NoveltyCurve, WindowGridResult
from .identify import IdentityEstimate, TimelineEntry

DPI = 130

plt.rcParams.update({
    "figure.autolayout": True,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _save(fig, path) -> None:
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def novelty_figure(curve: NoveltyCurve, path) -> None:
    """Mean novelty ratio per week with a +/- one-sigma band per field."""
    fields: dict[str, list[tuple[int, float, float]]] = {}
    for t, fname, mean, var in curve.rows:
        fields.setdefault(fname, []).append((t, mean, var))
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for fname, rows in fields.items():
        rows.sort()
        ts = np.array([r[0] for r in rows])
        means = np.array([r[1] for r in rows])
        sig = np.sqrt(np.array([r[2] for r in rows]))
        line, = ax.plot(ts, means, marker="o", markersize=3, label=fname)
        ax.fill_between(ts, means - sig, means + sig,
                        color=line.get_color(), alpha=0.15, linewidth=0)
    ax.set_xlabel("observation epoch (weeks)")
    ax.set_ylabel("novelty ratio")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper right")
    _save(fig, path)


def confusion_figure(report: AcceptanceReport, path) -> None:
    """Acceptance matrix heat map; rows are models, columns test sets."""
    m = report.matrix()
    n = len(report.users)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * n + 2.2),
                                    max(3.4, 0.45 * n + 1.8)))
    im = ax.imshow(m, vmin=0.0, vmax=100.0, cmap="viridis")
    ax.set_xticks(range(n), [f"t_{u}" for u in report.users],
                  rotation=90, fontsize=7)
    ax.set_yticks(range(n), [f"m_{u}" for u in report.users], fontsize=7)
    ax.grid(False)
    if n <= 12:
        for i in range(n):
            for j in range(n):
                ax.text(j, i, f"{m[i, j]:.0f}", ha="center", va="center",
                        fontsize=6, color="w" if m[i, j] < 60 else "k")
    fig.colorbar(im, ax=ax, label="accepted windows (%)")
    ax.set_title(f"self {report.acc_self:.1f}%  other {report.acc_other:.1f}%")
    _save(fig, path)


def window_grid_figure(results: Sequence[WindowGridResult], path) -> None:
    """Grouped bars of ACC_self / ACC_other / ACC per (D, S) geometry."""
    labels = [f"D={r.duration_d}s\nS={r.shift_s}s" for r in results]
    x = np.arange(len(results))
    selfs = [r.acc_self for r in results]
    others = [r.acc_other for r in results]
    accs = [r.acc for r in results]
    fig, ax = plt.subplots(figsize=(max(5.0, 1.1 * len(results)), 3.8))
    ax.bar(x - 0.25, selfs, width=0.25, label="ACC_self")
    ax.bar(x, others, width=0.25, label="ACC_other")
    ax.bar(x + 0.25, accs, width=0.25, label="ACC")
    ax.set_xticks(x, labels, fontsize=7)
    ax.set_ylabel("acceptance (%)")
    ax.legend(loc="upper right", fontsize=7)
    _save(fig, path)


def timeline_figure(timeline: Sequence[TimelineEntry],
                    estimates: Sequence[IdentityEstimate], path) -> None:
    """Identification timeline: acceptances per model over window starts.

    Small dots mark windows a model accepted, large squares the ground
    truth (when present) and crosses the smoothed estimate.
    """
    users = sorted({u for e in timeline for u in e.scores})
    ypos = {u: i for i, u in enumerate(users)}
    t0 = timeline[0].window_start if timeline else 0
    minutes = [(e.window_start - t0) / 60.0 for e in timeline]

    fig, ax = plt.subplots(figsize=(7.2, max(2.6, 0.4 * len(users) + 1.2)))
    for e, minute in zip(timeline, minutes):
        if e.true_user is not None and e.true_user in ypos:
            ax.scatter(minute, ypos[e.true_user], marker="s", s=64,
                       facecolors="none", edgecolors="tab:gray", linewidths=0.8)
        for u in sorted(e.accepted_models):
            ax.scatter(minute, ypos[u], marker=".", s=16, color="tab:blue")
    est_x = [m for m, est in zip(minutes, estimates) if est.estimated_user]
    est_y = [ypos[est.estimated_user] for est in estimates if est.estimated_user]
    if est_x:
        ax.scatter(est_x, est_y, marker="x", s=22, color="tab:red",
                   label="smoothed estimate")
        ax.legend(loc="upper right", fontsize=7)
    ax.set_yticks(range(len(users)), users, fontsize=7)
    ax.set_xlabel("minutes since first window")
    ax.set_ylim(-0.8, len(users) - 0.2)
    _save(fig, path)
