"""Acceptance metrics, pairwise confusion, grid search and novelty analysis.

Acceptance ratios are percentages of accepted windows. ACC = ACC_self -
ACC_other and can go negative when a model accepts competitors' traffic
more readily than its own user's. ACC_other pools all off-diagonal cells
of the pairwise matrix.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .features import (KeyMode, Vocabulary, Window, WindowConfig,
                       build_vocabulary, split_media_type, window_stream,
                       windows_by_key)
from .kernels import KernelKind, KernelSpec
from .logdata import SECONDS_PER_WEEK, TransactionLog
from .ocsvm import train_ocsvm
from .smo import SolverError
from .svdd import train_svdd


class EvaluationError(ValueError):
    pass


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Map preserving input order; threads only when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def train_one_class(algo: str, vectors, param: float, kernel: KernelSpec,
                    tol: float = 1e-3, max_iter: int = 10_000_000):
    """Dispatch to the requested one-class trainer; ``param`` is nu or C."""
    if algo == "ocsvm":
        return train_ocsvm(vectors, param, kernel, tol=tol, max_iter=max_iter)
    if algo == "svdd":
        return train_svdd(vectors, param, kernel, tol=tol, max_iter=max_iter)
    raise ValueError(f"unknown algorithm {algo!r}")


def acceptance_ratio(model, windows: Sequence[Window]) -> float:
    """Percentage of windows the model accepts."""
    if not windows:
        raise EvaluationError("acceptance ratio undefined for an empty window list")
    accepted = int(model.accepts([w.vector for w in windows]).sum())
    return 100.0 * accepted / len(windows)


@dataclass
class AcceptanceReport:
    """Pairwise acceptance matrix plus its diagonal/off-diagonal averages."""

    acc_self: float
    acc_other: float
    per_pair: dict[tuple[str, str], float]
    users: list[str]
    single_user: bool = False

    @property
    def acc(self) -> float:
        return self.acc_self - self.acc_other

    def matrix(self) -> np.ndarray:
        n = len(self.users)
        m = np.zeros((n, n))
        for i, mu in enumerate(self.users):
            for j, tu in enumerate(self.users):
                m[i, j] = self.per_pair[(mu, tu)]
        return m

    def write_confusion_csv(self, path) -> None:
        """Confusion matrix CSV: rows are models, columns test sets."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["model"] + [f"t_{u}" for u in self.users])
            for mu in self.users:
                writer.writerow([f"m_{mu}"] +
                                [f"{self.per_pair[(mu, tu)]:.6g}" for tu in self.users])

    def summary_dict(self) -> dict:
        return {
            "acc_self": self.acc_self,
            "acc_other": self.acc_other,
            "acc": self.acc,
            "n_users": len(self.users),
            "single_user": self.single_user,
        }


def evaluate_pairwise(models: dict[str, object],
                      test_sets: dict[str, list[Window]],
                      workers: int = 1) -> AcceptanceReport:
    """Feed every user's test windows to every user's model.

    ``per_pair[(j, i)]`` is the percentage of user i's windows accepted by
    user j's model. With a single user the off-diagonal average is
    undefined and reported as 0 with ``single_user`` set.
    """
    users = sorted(models)
    missing = [u for u in users if u not in test_sets or not test_sets[u]]
    if missing:
        raise EvaluationError(f"missing test windows for users: {', '.join(missing)}")

    def row(model_user: str) -> list[float]:
        model = models[model_user]
        return [acceptance_ratio(model, test_sets[tu]) for tu in users]

    rows = _pmap(row, users, workers)
    per_pair = {(mu, tu): rows[i][j]
                for i, mu in enumerate(users) for j, tu in enumerate(users)}
    diag = [per_pair[(u, u)] for u in users]
    off = [v for (mu, tu), v in per_pair.items() if mu != tu]
    return AcceptanceReport(
        acc_self=float(np.mean(diag)),
        acc_other=float(np.mean(off)) if off else 0.0,
        per_pair=per_pair,
        users=users,
        single_user=len(users) == 1,
    )


# --------------------------------------------------------------------------
# Grid search. Stage 1 fixes the window geometry globally; stage 2 picks the
# kernel and nu/C per user at the chosen geometry.
# --------------------------------------------------------------------------

DEFAULT_PARAM_GRID = (0.999, 0.99, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5,
                      0.4, 0.3, 0.2, 0.1, 0.05, 0.01, 0.001)
DEFAULT_KERNEL_GRID = (KernelKind.LINEAR, KernelKind.POLYNOMIAL,
                       KernelKind.RBF, KernelKind.SIGMOID)
DEFAULT_WINDOW_GRID = ((60, 6), (60, 30), (300, 60), (600, 60),
                       (1800, 300), (3600, 300))


@dataclass
class WindowGridResult:
    duration_d: int
    shift_s: int
    acc_self: float
    acc_other: float
    n_models: int
    error: str | None = None

    @property
    def acc(self) -> float:
        return self.acc_self - self.acc_other


def grid_search_window(train_log: TransactionLog,
                       window_grid: Sequence[tuple[int, int]],
                       algo: str, param: float, kernel: KernelSpec,
                       vocab: Vocabulary | None = None,
                       rank_key: str = "acc_self",
                       tol: float = 1e-3,
                       workers: int = 1) -> list[WindowGridResult]:
    """Stage-1 search over (D, S) pairs, ranked best-first.

    For each geometry one model per user is trained on that user's training
    windows; self-acceptance is measured on those same windows and
    other-acceptance on all other users' training windows. Ranking defaults
    to self-acceptance (the criterion used to pick D=60s, S=30s), with
    ``rank_key="acc"`` available.
    """
    if rank_key not in ("acc_self", "acc"):
        raise ValueError("rank_key must be 'acc_self' or 'acc'")
    users = train_log.user_ids()
    if len(users) < 2:
        raise EvaluationError("window grid search needs at least 2 users")
    if vocab is None:
        vocab = build_vocabulary(train_log)

    def evaluate_cell(cell: tuple[int, int]) -> WindowGridResult:
        d, s = cell
        cfg = WindowConfig(d, s, KeyMode.PER_USER)
        wins = windows_by_key(window_stream(train_log, cfg, vocab))
        usable = {u: ws for u, ws in wins.items() if ws}
        try:
            models = {u: train_one_class(algo, [w.vector for w in ws], param,
                                         kernel, tol=tol)
                      for u, ws in usable.items()}
            report = evaluate_pairwise(models, usable)
        except (SolverError, EvaluationError) as exc:
            return WindowGridResult(d, s, float("nan"), float("nan"), 0,
                                    error=f"D={d},S={s}: {exc}")
        return WindowGridResult(d, s, report.acc_self, report.acc_other,
                                len(models))

    results = _pmap(evaluate_cell, list(window_grid), workers)
    order = {(r.duration_d, r.shift_s): idx for idx, r in enumerate(results)}

    def sort_key(r: WindowGridResult):
        value = r.acc_self if rank_key == "acc_self" else r.acc
        if r.error is not None or np.isnan(value):
            value = -np.inf
        return (-value, order[(r.duration_d, r.shift_s)])

    return sorted(results, key=sort_key)


@dataclass
class ModelGridCell:
    kernel_kind: KernelKind
    param: float
    acc_self: float = float("nan")
    acc_other: float = float("nan")
    error: str | None = None

    @property
    def acc(self) -> float:
        return self.acc_self - self.acc_other


@dataclass
class ModelGridResult:
    cells: list[ModelGridCell]
    best: ModelGridCell


def kernel_spec_for(kind: KernelKind, base: KernelSpec | None = None) -> KernelSpec:
    """A KernelSpec of the given kind, inheriting parameters from ``base``."""
    if base is None:
        return KernelSpec(kind=kind)
    return KernelSpec(kind=kind, rbf_width_c=base.rbf_width_c,
                      poly_degree=base.poly_degree, poly_coef0=base.poly_coef0,
                      poly_scale=base.poly_scale, sig_scale=base.sig_scale,
                      sig_coef0=base.sig_coef0)


def grid_search_model(user_train_windows: Sequence[Window],
                      other_train_windows: Sequence[Window],
                      kernel_grid: Sequence[KernelKind],
                      param_grid: Sequence[float],
                      algo: str,
                      base_kernel: KernelSpec | None = None,
                      tol: float = 1e-3,
                      workers: int = 1) -> ModelGridResult:
    """Stage-2 per-user search over kernel kind and nu/C.

    The winning cell maximizes ACC; ties break toward the kernel listed
    first in ``kernel_grid`` and then toward the larger parameter value.
    Failed cells (solver errors, infeasible C) stay in the table with their
    error message and are skipped by the argmax.
    """
    if not user_train_windows:
        raise EvaluationError("no training windows for this user")
    own = [w.vector for w in user_train_windows]
    others = [w.vector for w in other_train_windows]

    grid = [(kk, p) for kk in kernel_grid for p in param_grid]

    def evaluate_cell(cell: tuple[KernelKind, float]) -> ModelGridCell:
        kk, p = cell
        try:
            model = train_one_class(algo, own, p, kernel_spec_for(kk, base_kernel),
                                    tol=tol)
            a_self = 100.0 * float(model.accepts(own).mean())
            a_other = (100.0 * float(model.accepts(others).mean())
                       if others else 0.0)
        except SolverError as exc:
            return ModelGridCell(kk, p, error=str(exc))
        return ModelGridCell(kk, p, acc_self=a_self, acc_other=a_other)

    cells = _pmap(evaluate_cell, grid, workers)
    kernel_rank = {kk: i for i, kk in enumerate(kernel_grid)}
    best = None
    for cell in cells:
        if cell.error is not None:
            continue
        key = (-cell.acc, kernel_rank[cell.kernel_kind], -cell.param)
        if best is None or key < best[0]:
            best = (key, cell)
    if best is None:
        raise EvaluationError("all grid cells failed")
    return ModelGridResult(cells=cells, best=best[1])


# --------------------------------------------------------------------------
# Temporal novelty.
# --------------------------------------------------------------------------

NOVELTY_FIELDS = ("category", "subtype", "application_type")


def _field_values(log: Iterable, field_name: str) -> set[str]:
    values: set[str] = set()
    for t in log:
        if field_name == "category":
            v = t.category
        elif field_name == "application_type":
            v = t.application_type
        elif field_name == "subtype":
            v = split_media_type(t.media_type)[1]
        elif field_name == "supertype":
            v = split_media_type(t.media_type)[0]
        else:
            raise ValueError(f"unknown novelty field {field_name!r}")
        if v:
            values.add(v)
    return values


def split_at_weeks(user_log: TransactionLog, t_weeks: float
                   ) -> tuple[list, list]:
    """Observed/subsequent split at t weeks past the user's first record."""
    if len(user_log) == 0:
        return [], []
    delim = user_log[0].timestamp + t_weeks * SECONDS_PER_WEEK
    observed = [t for t in user_log if t.timestamp < delim]
    subsequent = [t for t in user_log if t.timestamp >= delim]
    return observed, subsequent


def novel_value_set(user_log: TransactionLog, t_weeks: float,
                    field_name: str) -> set[str]:
    observed, subsequent = split_at_weeks(user_log, t_weeks)
    return _field_values(subsequent, field_name) - _field_values(observed, field_name)


def novelty_features(user_log: TransactionLog, t_weeks: float,
                     field_name: str) -> float:
    """Share of the subsequent set's field values unseen before the delimiter."""
    observed, subsequent = split_at_weeks(user_log, t_weeks)
    sub_values = _field_values(subsequent, field_name)
    if not sub_values:
        return 0.0
    obs_values = _field_values(observed, field_name)
    return len(sub_values - obs_values) / len(sub_values)


def novelty_windows(observed: Sequence[Window],
                    subsequent: Sequence[Window]) -> float:
    """Share of subsequent windows whose vector never occurs, exactly, among
    the observed windows."""
    if not subsequent:
        raise EvaluationError("novelty undefined: no subsequent windows")
    seen = {w.vector for w in observed}
    novel = sum(1 for w in subsequent if w.vector not in seen)
    return novel / len(subsequent)


@dataclass
class NoveltyCurve:
    """Mean/variance of per-user novelty ratios over week delimiters."""

    rows: list[tuple[int, str, float, float]] = field(default_factory=list)

    def add(self, t_weeks: int, field_name: str, ratios: Sequence[float]) -> None:
        arr = np.asarray(ratios, dtype=float)
        self.rows.append((t_weeks, field_name,
                          float(arr.mean()) if arr.size else 0.0,
                          float(arr.var()) if arr.size else 0.0))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_weeks", "field", "mean", "variance"])
            for t, fname, mean, var in self.rows:
                writer.writerow([t, fname, f"{mean:.6f}", f"{var:.6f}"])


def novelty_curves(log: TransactionLog, window_cfg: WindowConfig,
                   vocab: Vocabulary | None = None,
                   weeks_range: Sequence[int] = range(1, 22),
                   fields: Sequence[str] = NOVELTY_FIELDS) -> NoveltyCurve:
    """Per-delimiter novelty for the given fields plus whole windows.

    The window-level ratio follows the observed/subsequent construction:
    both transaction halves are windowed independently and a subsequent
    window counts as novel when its vector never occurs among the observed
    windows.
    """
    if vocab is None:
        vocab = build_vocabulary(log)
    curve = NoveltyCurve()
    users = log.user_ids()
    user_logs = {u: log.for_user(u) for u in users}
    win_cfg = WindowConfig(window_cfg.duration_d, window_cfg.shift_s,
                           KeyMode.PER_USER)
    for t in weeks_range:
        for fname in fields:
            ratios = [novelty_features(user_logs[u], t, fname) for u in users]
            curve.add(t, fname, ratios)
        window_ratios = []
        for u in users:
            observed, subsequent = split_at_weeks(user_logs[u], t)
            sub_wins = window_stream(TransactionLog(subsequent, presorted=True),
                                     win_cfg, vocab)
            if not sub_wins:
                continue
            obs_wins = window_stream(TransactionLog(observed, presorted=True),
                                     win_cfg, vocab)
            window_ratios.append(novelty_windows(obs_wins, sub_wins))
        curve.add(t, "windows", window_ratios)
    return curve
