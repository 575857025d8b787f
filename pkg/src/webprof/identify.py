"""Host-stream identification: who is at the keyboard of a shared device.

Every host window is scored against every user model; the smoothed
estimate at each window is the user whose model accepted the largest
fraction of the last k windows. Ties and all-reject lookbacks yield no
estimate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

from .features import (KeyMode, Vocabulary, Window, WindowConfig,
                       window_spans, window_stream)
from .logdata import TransactionLog


@dataclass
class TimelineEntry:
    window_start: int
    scores: dict[str, float]
    accepted_models: frozenset[str]
    true_user: str | None = None


@dataclass
class IdentityEstimate:
    window_start: int
    estimated_user: str | None
    confidence: float


def score_host_stream(models: dict[str, object],
                      host_windows: Sequence[Window]) -> list[TimelineEntry]:
    """Score each host window with every model, in window order.

    ``host_windows`` must come from host-keyed windowing built with the
    models' vocabulary.
    """
    users = sorted(models)
    vectors = [w.vector for w in host_windows]
    all_scores = {u: models[u].scores(vectors) for u in users}
    entries = []
    for idx, w in enumerate(host_windows):
        scores = {u: float(all_scores[u][idx]) for u in users}
        accepted = frozenset(u for u in users if scores[u] >= 0.0)
        entries.append(TimelineEntry(window_start=w.start, scores=scores,
                                     accepted_models=accepted))
    return entries


def attach_ground_truth(entries: Sequence[TimelineEntry],
                        host_log: TransactionLog,
                        cfg: WindowConfig) -> None:
    """Label each timeline entry with the majority user of its window.

    Recomputes the same window spans the host stream was built from; ties
    go to the user appearing first inside the window.
    """
    stamps = [t.timestamp for t in host_log]
    by_start: dict[int, tuple[int, int]] = {
        start: (lo, hi)
        for start, lo, hi in window_spans(stamps, cfg.duration_d, cfg.shift_s)
    }
    for entry in entries:
        span = by_start.get(entry.window_start)
        if span is None:
            continue
        lo, hi = span
        counts: dict[str, int] = {}
        for t in host_log[lo:hi]:
            counts[t.user_id] = counts.get(t.user_id, 0) + 1
        best = max(counts.items(), key=lambda kv: (kv[1], -_first_index(
            host_log, lo, hi, kv[0])))
        entry.true_user = best[0]


def _first_index(log: TransactionLog, lo: int, hi: int, user: str) -> int:
    for i in range(lo, hi):
        if log[i].user_id == user:
            return i
    return hi


def smooth_identity(timeline: Sequence[TimelineEntry], k: int
                    ) -> list[IdentityEstimate]:
    """Consecutive-window smoothing over a lookback of k windows.

    At each position the per-user acceptance fraction over the last
    min(k, elapsed) windows is computed; the argmax wins. A tied maximum or
    a lookback with no acceptances at all produces ``estimated_user=None``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    estimates = []
    for idx, entry in enumerate(timeline):
        lo = max(0, idx - k + 1)
        lookback = timeline[lo:idx + 1]
        n = len(lookback)
        counts: dict[str, int] = {}
        for e in lookback:
            for u in e.accepted_models:
                counts[u] = counts.get(u, 0) + 1
        if not counts:
            estimates.append(IdentityEstimate(entry.window_start, None, 0.0))
            continue
        top = max(counts.values())
        leaders = [u for u, c in counts.items() if c == top]
        confidence = top / n
        user = leaders[0] if len(leaders) == 1 else None
        estimates.append(IdentityEstimate(entry.window_start, user, confidence))
    return estimates


def write_timeline_csv(path, timeline: Sequence[TimelineEntry],
                       estimates: Sequence[IdentityEstimate]) -> None:
    """Timeline CSV: window_start, truth, estimate, confidence, accepted set."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", "true_user", "estimated_user",
                         "confidence", "accepted"])
        for entry, est in zip(timeline, estimates):
            writer.writerow([
                entry.window_start,
                entry.true_user or "",
                est.estimated_user or "",
                f"{est.confidence:.6f}",
                ";".join(sorted(entry.accepted_models)),
            ])


def host_windows_for(log: TransactionLog, host_id: str, cfg: WindowConfig,
                     vocab: Vocabulary):
    """Windows for one host, keyed per host regardless of cfg.key_mode."""
    host_log = log.for_host(host_id)
    host_cfg = WindowConfig(cfg.duration_d, cfg.shift_s, KeyMode.PER_HOST)
    return host_log, window_stream(host_log, host_cfg, vocab)
