"""Feature extraction: vocabularies, sparse vectors and sliding windows.

A transaction is encoded as a fixed-dimension vector laid out as

    [http_action (4) | uri_scheme (2) | public_address_flag (1) |
     reputation_risk (1) | reputation_verified (1) |
     category | supertype | subtype | application_type]

Bag-of-words blocks carry one binary column per distinct value seen when the
vocabulary was built; the three columns in the middle are numeric. Windowed
aggregation ORs the binary columns and averages the numeric ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .logdata import HTTP_ACTIONS, URI_SCHEMES, Transaction, TransactionLog

# Scalar (averaged) column indices in every vocabulary layout. Columns 0-5
# are the two closed enums, so these offsets never move.
COL_PUBLIC_FLAG = 6
COL_REPUTATION_RISK = 7
COL_REPUTATION_VERIFIED = 8
SCALAR_COLUMNS = (COL_PUBLIC_FLAG, COL_REPUTATION_RISK, COL_REPUTATION_VERIFIED)
N_FIXED_COLUMNS = 9

REPUTATION_RISK_VALUE = {"Minimal": 0.0, "Medium": 0.5, "High": 1.0}


def split_media_type(media: str) -> tuple[str, str]:
    """Split ``"super/sub"`` at the first slash; no slash means no subtype."""
    idx = media.find("/")
    if idx < 0:
        return media, ""
    return media[:idx], media[idx + 1:]


def map_reputation(rep: str) -> tuple[float, float]:
    """Reputation field -> (verified flag, risk value).

    Minimal/Medium/High map to risk 0 / 0.5 / 1 with verified=1; an
    unverified reputation yields verified=0 and the default risk 0.
    """
    if rep == "Unverified":
        return 0.0, 0.0
    return 1.0, REPUTATION_RISK_VALUE[rep]


class FeatureVector:
    """Sparse non-negative vector with values in [0, 1].

    Zero entries are never stored. Instances are immutable and hashable, so
    exact-equality comparisons (used by the window-novelty analysis) are
    cheap.
    """

    __slots__ = ("dim", "entries", "_sq_norm", "_hash")

    def __init__(self, dim: int, entries: dict[int, float]):
        if dim < 0:
            raise ValueError("dim must be >= 0")
        clean: dict[int, float] = {}
        for col, val in entries.items():
            if not (0 <= col < dim):
                raise ValueError(f"column {col} out of range for dim {dim}")
            if val == 0.0:
                continue
            if not (0.0 <= val <= 1.0):
                raise ValueError(f"value {val} at column {col} outside [0, 1]")
            clean[col] = float(val)
        self.dim = dim
        self.entries = clean
        self._sq_norm = None
        self._hash = None

    def __eq__(self, other) -> bool:
        return (isinstance(other, FeatureVector)
                and self.dim == other.dim and self.entries == other.entries)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dim, tuple(sorted(self.entries.items()))))
        return self._hash

    def __repr__(self) -> str:
        return f"FeatureVector(dim={self.dim}, nnz={len(self.entries)})"

    def get(self, col: int) -> float:
        return self.entries.get(col, 0.0)

    def sq_norm(self) -> float:
        if self._sq_norm is None:
            self._sq_norm = float(sum(v * v for v in self.entries.values()))
        return self._sq_norm

    def dot(self, other: "FeatureVector") -> float:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        a, b = self.entries, other.entries
        if len(b) < len(a):
            a, b = b, a
        return float(sum(v * b[c] for c, v in a.items() if c in b))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        for c, v in self.entries.items():
            out[c] = v
        return out

    def sorted_items(self) -> list[tuple[int, float]]:
        return sorted(self.entries.items())


def dense_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an (n, dim) float array."""
    if not vectors:
        raise ValueError("empty vector list")
    dim = vectors[0].dim
    out = np.zeros((len(vectors), dim))
    for i, v in enumerate(vectors):
        if v.dim != dim:
            raise ValueError(f"dimension mismatch: {v.dim} vs {dim}")
        for c, val in v.entries.items():
            out[i, c] = val
    return out


@dataclass(frozen=True)
class Vocabulary:
    """Fixed value->column layout shared by training and scoring.

    Open-field values are assigned columns lexicographically, after the
    fixed http_action / uri_scheme / scalar block, in the order category,
    supertype, subtype, application_type.
    """

    category: tuple[str, ...]
    supertype: tuple[str, ...]
    subtype: tuple[str, ...]
    application_type: tuple[str, ...]

    @property
    def total_dim(self) -> int:
        return (N_FIXED_COLUMNS + len(self.category) + len(self.supertype)
                + len(self.subtype) + len(self.application_type))

    def column_maps(self) -> dict[str, dict[str, int]]:
        maps: dict[str, dict[str, int]] = {
            "http_action": {v: i for i, v in enumerate(sorted(HTTP_ACTIONS))},
            "uri_scheme": {v: 4 + i for i, v in enumerate(sorted(URI_SCHEMES))},
        }
        base = N_FIXED_COLUMNS
        for fname in ("category", "supertype", "subtype", "application_type"):
            values = getattr(self, fname)
            maps[fname] = {v: base + i for i, v in enumerate(values)}
            base += len(values)
        return maps

    def column_names(self) -> list[str]:
        names = [f"http_action={v}" for v in sorted(HTTP_ACTIONS)]
        names += [f"uri_scheme={v}" for v in sorted(URI_SCHEMES)]
        names += ["public_address_flag", "reputation_risk", "reputation_verified"]
        for fname in ("category", "supertype", "subtype", "application_type"):
            names += [f"{fname}={v}" for v in getattr(self, fname)]
        return names

    def to_json_dict(self) -> dict:
        return {
            "category": list(self.category),
            "supertype": list(self.supertype),
            "subtype": list(self.subtype),
            "application_type": list(self.application_type),
            "total_dim": self.total_dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Vocabulary":
        vocab = cls(
            category=tuple(d["category"]),
            supertype=tuple(d["supertype"]),
            subtype=tuple(d["subtype"]),
            application_type=tuple(d["application_type"]),
        )
        if "total_dim" in d and d["total_dim"] != vocab.total_dim:
            raise ValueError("vocabulary dimension mismatch in file")
        return vocab


def build_vocabulary(log: TransactionLog) -> Vocabulary:
    """Collect distinct open-field values from a log. Empty strings produce
    no column; input order is irrelevant."""
    cats: set[str] = set()
    supers: set[str] = set()
    subs: set[str] = set()
    apps: set[str] = set()
    for t in log:
        if t.category:
            cats.add(t.category)
        sup, sub = split_media_type(t.media_type)
        if sup:
            supers.add(sup)
        if sub:
            subs.add(sub)
        if t.application_type:
            apps.add(t.application_type)
    return Vocabulary(
        category=tuple(sorted(cats)),
        supertype=tuple(sorted(supers)),
        subtype=tuple(sorted(subs)),
        application_type=tuple(sorted(apps)),
    )


class TransactionEncoder:
    """Encodes transactions against a fixed vocabulary.

    Values absent from the vocabulary are dropped silently; the model input
    dimension never changes after training.
    """

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.dim = vocab.total_dim
        self._maps = vocab.column_maps()

    def encode(self, tx: Transaction) -> FeatureVector:
        entries: dict[int, float] = {}
        entries[self._maps["http_action"][tx.http_action]] = 1.0
        entries[self._maps["uri_scheme"][tx.uri_scheme]] = 1.0
        if tx.is_private_destination:
            entries[COL_PUBLIC_FLAG] = 1.0
        verified, risk = map_reputation(tx.reputation)
        if risk:
            entries[COL_REPUTATION_RISK] = risk
        if verified:
            entries[COL_REPUTATION_VERIFIED] = verified
        if tx.category:
            col = self._maps["category"].get(tx.category)
            if col is not None:
                entries[col] = 1.0
        sup, sub = split_media_type(tx.media_type)
        if sup:
            col = self._maps["supertype"].get(sup)
            if col is not None:
                entries[col] = 1.0
        if sub:
            col = self._maps["subtype"].get(sub)
            if col is not None:
                entries[col] = 1.0
        if tx.application_type:
            col = self._maps["application_type"].get(tx.application_type)
            if col is not None:
                entries[col] = 1.0
        return FeatureVector(self.dim, entries)


def encode_transaction(tx: Transaction, vocab: Vocabulary) -> FeatureVector:
    return TransactionEncoder(vocab).encode(tx)


def aggregate(vectors: Sequence[FeatureVector]) -> FeatureVector:
    """Collapse same-dimension vectors into one: binary columns are OR-ed,
    scalar columns averaged over *all* inputs (absent entries count as 0).

    Scalar sums use math.fsum, so the result is bit-identical under any
    permutation of the inputs.
    """
    if not vectors:
        raise ValueError("aggregate() requires a non-empty vector list")
    dim = vectors[0].dim
    n = len(vectors)
    out: dict[int, float] = {}
    scalar_vals: dict[int, list[float]] = {col: [] for col in SCALAR_COLUMNS}
    for v in vectors:
        if v.dim != dim:
            raise ValueError(f"dimension mismatch: {v.dim} vs {dim}")
        for col, val in v.entries.items():
            if col in scalar_vals:
                scalar_vals[col].append(val)
            elif val > out.get(col, 0.0):
                out[col] = val
    for col, vals in scalar_vals.items():
        if vals:
            out[col] = math.fsum(vals) / n
    return FeatureVector(dim, out)


class KeyMode(str, Enum):
    PER_USER = "user"
    PER_HOST = "host"


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window geometry: duration D and shift S in seconds, S <= D."""

    duration_d: int
    shift_s: int
    key_mode: KeyMode = KeyMode.PER_USER

    def __post_init__(self):
        if self.shift_s <= 0 or self.duration_d <= 0:
            raise ValueError("duration and shift must be positive")
        if self.shift_s > self.duration_d:
            raise ValueError("shift S must not exceed duration D")


@dataclass(frozen=True)
class Window:
    """One non-empty aggregated window for a single user or host."""

    key: str
    start: int
    vector: FeatureVector
    tx_count: int


def window_spans(timestamps: Sequence[int], duration_d: int, shift_s: int
                 ) -> Iterator[tuple[int, int, int]]:
    """Yield (start, lo, hi) index spans of non-empty windows.

    Windows are anchored at the first timestamp t0 and start at t0 + k*S;
    a window covers [start, start + D). ``timestamps`` must be sorted.
    Only windows containing at least one record are produced, in ascending
    start order.
    """
    n = len(timestamps)
    if n == 0:
        return
    ts = np.asarray(timestamps, dtype=np.int64)
    t0 = int(ts[0])
    # k indices of windows containing each record: those k with
    # t0 + k*S <= t < t0 + k*S + D
    rel = ts - t0
    k_hi = rel // shift_s
    k_lo = (rel - duration_d) // shift_s + 1
    np.maximum(k_lo, 0, out=k_lo)
    ks: set[int] = set()
    for lo, hi in zip(k_lo.tolist(), k_hi.tolist()):
        ks.update(range(lo, hi + 1))
    for k in sorted(ks):
        start = t0 + k * shift_s
        lo = int(np.searchsorted(ts, start, side="left"))
        hi = int(np.searchsorted(ts, start + duration_d, side="left"))
        if hi > lo:
            yield start, lo, hi


def _key_of(tx: Transaction, mode: KeyMode) -> str:
    return tx.user_id if mode is KeyMode.PER_USER else tx.host_id


def window_stream(log: TransactionLog, cfg: WindowConfig, vocab: Vocabulary
                  ) -> list[Window]:
    """Aggregate a log into per-key sliding windows.

    Keys (users or hosts, per ``cfg.key_mode``) are processed in order of
    first appearance; within a key, windows are in ascending start order.
    A transaction can contribute to several overlapping windows.
    """
    encoder = TransactionEncoder(vocab)
    per_key: dict[str, list[Transaction]] = {}
    for t in log:
        per_key.setdefault(_key_of(t, cfg.key_mode), []).append(t)
    windows: list[Window] = []
    for key, txs in per_key.items():
        encoded = [encoder.encode(t) for t in txs]
        stamps = [t.timestamp for t in txs]
        for start, lo, hi in window_spans(stamps, cfg.duration_d, cfg.shift_s):
            windows.append(Window(
                key=key, start=start,
                vector=aggregate(encoded[lo:hi]),
                tx_count=hi - lo,
            ))
    return windows


def windows_by_key(windows: Iterable[Window]) -> dict[str, list[Window]]:
    out: dict[str, list[Window]] = {}
    for w in windows:
        out.setdefault(w.key, []).append(w)
    return out


def dump_windows(windows: Iterable[Window], path) -> None:
    """Debug dump: ``key,start,tx_count`` then sparse ``col:value`` pairs."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w in windows:
            pairs = ",".join(f"{c}:{v:.17g}" for c, v in w.vector.sorted_items())
            line = f"{w.key},{w.start},{w.tx_count}"
            fh.write(line + ("," + pairs if pairs else "") + "\n")
