"""Web-transaction log handling: parsing, filtering, splitting and synthesis.

The on-disk format is a 10-column CSV, one transaction per line::

    timestamp,user_id,host_id,http_action,uri_scheme,category,media_type,
    application_type,reputation,is_private

``timestamp`` is integer epoch-seconds, ``is_private`` is 0/1, and the
``category`` / ``media_type`` / ``application_type`` fields may be empty.
Commas inside fields are not supported; a line with more or fewer than ten
columns is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

HTTP_ACTIONS = ("CONNECT", "GET", "HEAD", "POST")
URI_SCHEMES = ("HTTP", "HTTPS")
REPUTATIONS = ("Minimal", "Medium", "High", "Unverified")

CSV_HEADER = ("timestamp,user_id,host_id,http_action,uri_scheme,"
              "category,media_type,application_type,reputation,is_private")

SECONDS_PER_WEEK = 7 * 24 * 3600


class LogParseError(ValueError):
    """A malformed log line; carries the 1-based line number and field name."""

    def __init__(self, line_no: int, field_name: str, message: str):
        super().__init__(f"line {line_no}, field {field_name}: {message}")
        self.line_no = line_no
        self.field_name = field_name


class SynthConfigError(ValueError):
    """Invalid synthetic-traffic configuration."""


@dataclass(frozen=True, slots=True)
class Transaction:
    """One parsed web transaction (immutable)."""

    timestamp: int
    user_id: str
    host_id: str
    http_action: str
    uri_scheme: str
    category: str
    media_type: str
    application_type: str
    reputation: str
    is_private_destination: bool

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if not self.user_id or not self.host_id:
            raise ValueError("user_id and host_id must be non-empty")
        if self.http_action not in HTTP_ACTIONS:
            raise ValueError(f"unknown http_action {self.http_action!r}")
        if self.uri_scheme not in URI_SCHEMES:
            raise ValueError(f"unknown uri_scheme {self.uri_scheme!r}")
        if self.reputation not in REPUTATIONS:
            raise ValueError(f"unknown reputation {self.reputation!r}")

    def to_csv_line(self) -> str:
        return ",".join((
            str(self.timestamp), self.user_id, self.host_id,
            self.http_action, self.uri_scheme, self.category,
            self.media_type, self.application_type, self.reputation,
            "1" if self.is_private_destination else "0",
        ))


class TransactionLog:
    """A sequence of transactions sorted by timestamp.

    Sorting is stable: records with equal timestamps keep their input order.
    Instances are immutable after construction and safe to share between
    threads.
    """

    __slots__ = ("records",)

    def __init__(self, records: Iterable[Transaction], presorted: bool = False):
        recs = list(records)
        if not presorted:
            recs.sort(key=lambda t: t.timestamp)
        self.records: tuple[Transaction, ...] = tuple(recs)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.records)

    def __getitem__(self, idx) -> Transaction:
        return self.records[idx]

    def __eq__(self, other) -> bool:
        return isinstance(other, TransactionLog) and self.records == other.records

    def user_ids(self) -> list[str]:
        """Distinct user ids in order of first appearance."""
        seen: dict[str, None] = {}
        for t in self.records:
            seen.setdefault(t.user_id, None)
        return list(seen)

    def host_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.records:
            seen.setdefault(t.host_id, None)
        return list(seen)

    def for_user(self, user_id: str) -> "TransactionLog":
        return TransactionLog((t for t in self.records if t.user_id == user_id),
                              presorted=True)

    def for_host(self, host_id: str) -> "TransactionLog":
        return TransactionLog((t for t in self.records if t.host_id == host_id),
                              presorted=True)


def _parse_line(line: str, line_no: int) -> Transaction:
    cols = line.split(",")
    if len(cols) != 10:
        raise LogParseError(line_no, "line", f"expected 10 columns, got {len(cols)}")
    (ts_s, user_id, host_id, action, scheme,
     category, media, app, reputation, private_s) = cols
    try:
        ts = int(ts_s)
    except ValueError:
        raise LogParseError(line_no, "timestamp", f"not an integer: {ts_s!r}") from None
    if ts < 0:
        raise LogParseError(line_no, "timestamp", "must be >= 0")
    if not user_id:
        raise LogParseError(line_no, "user_id", "must be non-empty")
    if not host_id:
        raise LogParseError(line_no, "host_id", "must be non-empty")
    if action not in HTTP_ACTIONS:
        raise LogParseError(line_no, "http_action", f"unknown value {action!r}")
    if scheme not in URI_SCHEMES:
        raise LogParseError(line_no, "uri_scheme", f"unknown value {scheme!r}")
    if reputation not in REPUTATIONS:
        raise LogParseError(line_no, "reputation", f"unknown value {reputation!r}")
    if private_s not in ("0", "1"):
        raise LogParseError(line_no, "is_private", f"must be 0 or 1, got {private_s!r}")
    return Transaction(
        timestamp=ts, user_id=user_id, host_id=host_id,
        http_action=action, uri_scheme=scheme, category=category,
        media_type=media, application_type=app, reputation=reputation,
        is_private_destination=(private_s == "1"),
    )


def parse_log(stream: Iterable[str]) -> TransactionLog:
    """Parse CSV lines into a timestamp-sorted log.

    ``stream`` is any iterable of lines (an open file works). An optional
    header line is skipped. Blank lines are ignored; an empty stream yields
    an empty log. Malformed lines raise :class:`LogParseError`.
    """
    records = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        if line_no == 1 and line == CSV_HEADER:
            continue
        records.append(_parse_line(line, line_no))
    return TransactionLog(records)


def parse_log_file(path) -> TransactionLog:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_log(fh)


def serialize_log(log: TransactionLog, header: bool = True) -> str:
    """Render a log back to its CSV form. ``parse_log`` inverts this exactly."""
    lines = [CSV_HEADER] if header else []
    lines.extend(t.to_csv_line() for t in log)
    return "\n".join(lines) + "\n"


def write_log_file(log: TransactionLog, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_log(log, header=header))


def filter_users(log: TransactionLog, min_tx: int) -> TransactionLog:
    """Keep only records of users having at least ``min_tx`` records."""
    if min_tx < 0:
        raise ValueError("min_tx must be >= 0")
    counts: dict[str, int] = {}
    for t in log:
        counts[t.user_id] = counts.get(t.user_id, 0) + 1
    return TransactionLog((t for t in log if counts[t.user_id] >= min_tx),
                          presorted=True)


def split_oldest(log: TransactionLog, train_fraction: float
                 ) -> tuple[TransactionLog, TransactionLog]:
    """Per-user temporal split: each user's oldest records go to train.

    For a user with n records, floor(train_fraction * n) oldest records land
    in the train half, the remainder in test. Both halves stay sorted; the
    original interleaving across users is preserved.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must be in (0, 1)")
    counts: dict[str, int] = {}
    for t in log:
        counts[t.user_id] = counts.get(t.user_id, 0) + 1
    quota = {u: math.floor(train_fraction * n) for u, n in counts.items()}
    taken: dict[str, int] = {u: 0 for u in counts}
    train, test = [], []
    for t in log:
        if taken[t.user_id] < quota[t.user_id]:
            taken[t.user_id] += 1
            train.append(t)
        else:
            test.append(t)
    return (TransactionLog(train, presorted=True),
            TransactionLog(test, presorted=True))


# --------------------------------------------------------------------------
# Synthetic traffic generation.
#
# Stands in for the proprietary benchmark logs: each user draws categorical
# field values from their own distributions, with exponential inter-arrival
# times, and moves between hosts in disjoint time segments so that hosts end
# up shared by several users.
# --------------------------------------------------------------------------

DEFAULT_START_TS = 1_430_000_000  # arbitrary fixed epoch origin


@dataclass(frozen=True)
class UserProfile:
    """Per-user traffic shape: field distributions and mean rate."""

    user_id: str
    rate_per_min: float
    category: dict[str, float]
    media_type: dict[str, float]
    application_type: dict[str, float]
    http_action: dict[str, float] = field(default_factory=lambda: {
        "GET": 0.7, "POST": 0.15, "CONNECT": 0.1, "HEAD": 0.05})
    uri_scheme: dict[str, float] = field(default_factory=lambda: {
        "HTTP": 0.6, "HTTPS": 0.4})
    reputation: dict[str, float] = field(default_factory=lambda: {
        "Minimal": 0.55, "Medium": 0.2, "High": 0.05, "Unverified": 0.2})
    private_prob: float = 0.1


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for :func:`generate_synthetic`."""

    users: tuple[UserProfile, ...]
    n_hosts: int
    weeks: float
    rng_seed: int
    start_ts: int = DEFAULT_START_TS
    segment_minutes: float = 60.0  # host reassignment granularity

    @property
    def n_users(self) -> int:
        return len(self.users)

    def validate(self) -> None:
        if self.n_users < 1:
            raise SynthConfigError("need at least one user")
        if self.n_hosts < 1:
            raise SynthConfigError("need at least one host")
        if self.weeks <= 0:
            raise SynthConfigError("weeks must be positive")
        for prof in self.users:
            if prof.rate_per_min <= 0:
                raise SynthConfigError(f"{prof.user_id}: rate must be positive")
            for fname in ("category", "media_type", "application_type",
                          "http_action", "uri_scheme", "reputation"):
                dist = getattr(prof, fname)
                if not dist:
                    raise SynthConfigError(f"{prof.user_id}: empty {fname} distribution")
                if any(w < 0 for w in dist.values()):
                    raise SynthConfigError(f"{prof.user_id}: negative weight in {fname}")
                if sum(dist.values()) <= 0:
                    raise SynthConfigError(f"{prof.user_id}: zero-weight {fname} distribution")


def _sampler(rng: np.random.Generator, dist: dict[str, float]):
    values = list(dist.keys())
    weights = np.array([dist[v] for v in values], dtype=float)
    p = weights / weights.sum()

    def sample(n: int) -> list[str]:
        idx = rng.choice(len(values), size=n, p=p)
        return [values[i] for i in idx]

    return sample


def generate_synthetic(cfg: SynthConfig) -> TransactionLog:
    """Generate a deterministic synthetic log for the given configuration.

    Per user: a Poisson arrival process (exponential inter-arrival times at
    ``rate_per_min``) over ``weeks`` of simulated time. The user's timeline
    is chopped into ``segment_minutes`` blocks, each assigned to one host
    from a small per-user host pool, so hosts serve several users in
    disjoint segments.
    """
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
    span_s = cfg.weeks * SECONDS_PER_WEEK
    seg_s = max(1.0, cfg.segment_minutes * 60.0)
    hosts = [f"host_{i}" for i in range(cfg.n_hosts)]

    records: list[Transaction] = []
    for prof in cfg.users:
        rate_per_s = prof.rate_per_min / 60.0
        n_expected = rate_per_s * span_s
        # draw arrivals in one vectorized pass, extending if we fall short
        times: list[float] = []
        t = 0.0
        while t < span_s:
            chunk = rng.exponential(1.0 / rate_per_s, size=max(16, int(n_expected * 1.2) + 16))
            for dt in chunk:
                t += dt
                if t >= span_s:
                    break
                times.append(t)
            else:
                continue
            break
        n = len(times)
        if n == 0:
            continue
        # per-user host pool: a few hosts, rotated per segment
        pool_size = min(cfg.n_hosts, 3)
        pool = [hosts[i] for i in
                rng.choice(cfg.n_hosts, size=pool_size, replace=False)]
        categories = _sampler(rng, prof.category)(n)
        medias = _sampler(rng, prof.media_type)(n)
        apps = _sampler(rng, prof.application_type)(n)
        actions = _sampler(rng, prof.http_action)(n)
        schemes = _sampler(rng, prof.uri_scheme)(n)
        reputations = _sampler(rng, prof.reputation)(n)
        privates = rng.random(n) < prof.private_prob
        for i, t_rel in enumerate(times):
            seg = int(t_rel // seg_s)
            host = pool[seg % len(pool)]
            records.append(Transaction(
                timestamp=cfg.start_ts + int(t_rel),
                user_id=prof.user_id,
                host_id=host,
                http_action=actions[i],
                uri_scheme=schemes[i],
                category=categories[i],
                media_type=medias[i],
                application_type=apps[i],
                reputation=reputations[i],
                is_private_destination=bool(privates[i]),
            ))
    return TransactionLog(records)


def make_profiles(n_users: int,
                  rng_seed: int,
                  rate_per_min: float = 1.0,
                  values_per_field: int = 8,
                  shared_fraction: float = 0.3,
                  ) -> tuple[UserProfile, ...]:
    """Build user profiles with controlled cross-user behavioural overlap.

    Each user prefers a private slice of the value space for category,
    media_type and application_type; ``shared_fraction`` of each user's
    probability mass goes to a pool of values common to everyone. 0 gives
    disjoint supports, values near 1 make users nearly indistinguishable.
    """
    if not (0.0 <= shared_fraction <= 1.0):
        raise SynthConfigError("shared_fraction must be in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    supertypes = ("text", "video", "audio", "image", "application")

    def field_values(prefix: str, user_idx: int) -> tuple[list[str], list[str]]:
        own = [f"{prefix}_u{user_idx}_{j}" for j in range(values_per_field)]
        shared = [f"{prefix}_shared_{j}" for j in range(values_per_field)]
        return own, shared

    def mix(own: list[str], shared: list[str]) -> dict[str, float]:
        dist: dict[str, float] = {}
        own_w = rng.dirichlet(np.ones(len(own))) * (1.0 - shared_fraction)
        for v, w in zip(own, own_w):
            dist[v] = float(w)
        if shared_fraction > 0:
            sh_w = rng.dirichlet(np.ones(len(shared))) * shared_fraction
            for v, w in zip(shared, sh_w):
                dist[v] = float(w)
        return dist

    profiles = []
    for u in range(n_users):
        cat = mix(*field_values("cat", u))
        app = mix(*field_values("app", u))
        media_own = [f"{supertypes[j % len(supertypes)]}/sub_u{u}_{j}"
                     for j in range(values_per_field)]
        media_shared = [f"{supertypes[j % len(supertypes)]}/sub_shared_{j}"
                        for j in range(values_per_field)]
        media = mix(media_own, media_shared)
        profiles.append(UserProfile(
            user_id=f"user_{u}",
            rate_per_min=rate_per_min,
            category=cat,
            media_type=media,
            application_type=app,
        ))
    return tuple(profiles)
