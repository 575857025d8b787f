"""Command-line entry point.

Subcommands: synth, train, gridsearch, evaluate, identify, novelty.
Settings resolve in three layers: built-in defaults, then a flat
``key = value`` config file (``--config``), then command-line flags.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
failure. All randomness flows from the single ``seed`` setting; outputs
are byte-identical across runs unless ``--stamp`` adds a timestamp line.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import evaluation, figures, identify as identify_mod
from .evaluation import (DEFAULT_KERNEL_GRID, DEFAULT_PARAM_GRID,
                         DEFAULT_WINDOW_GRID, EvaluationError,
                         evaluate_pairwise, grid_search_model,
                         grid_search_window, novelty_curves, train_one_class)
from .features import (KeyMode, Vocabulary, WindowConfig, build_vocabulary,
                       dump_windows, window_stream, windows_by_key)
from .kernels import KernelKind, KernelSpec, parse_kernel_name
from .logdata import (LogParseError, SynthConfig, SynthConfigError,
                      TransactionLog, filter_users, generate_synthetic,
                      make_profiles, parse_log_file, split_oldest,
                      write_log_file)
from .ocsvm import OcSvmModel
from .smo import SolverError
from .svdd import SvddModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


_DEFAULTS = {
    "log": None,
    "out": "out",
    "algo": "ocsvm",
    "duration": 60,
    "shift": 30,
    "kernel": "rbf",
    "nu": 0.5,
    "cost": 0.5,
    "seed": 0,
    "workers": 1,
    "min_tx": 1500,
    "split": 0.75,
    "figures": True,
    "stamp": False,
    "tol": 1e-3,
    # synth
    "users": 5,
    "hosts": 5,
    "weeks": 0.05,
    "rate": 1.0,
    "overlap": 0.3,
    "values_per_field": 8,
    # gridsearch
    "window_grid": ",".join(f"{d}:{s}" for d, s in DEFAULT_WINDOW_GRID),
    "kernel_grid": "linear,poly,rbf,sigmoid",
    "param_grid": ",".join(str(p) for p in DEFAULT_PARAM_GRID),
    "rank_key": "acc_self",
    # evaluate / identify / novelty
    "part": "test",
    "host": None,
    "k": 10,
    "weeks_max": 21,
    "dump_windows": None,
}

_TYPES = {
    "duration": int, "shift": int, "seed": int, "workers": int,
    "min_tx": int, "users": int, "hosts": int, "k": int,
    "values_per_field": int, "weeks_max": int,
    "nu": float, "cost": float, "split": float, "weeks": float,
    "rate": float, "overlap": float, "tol": float,
    "figures": bool, "stamp": bool,
}


def _coerce(key: str, raw: str):
    typ = _TYPES.get(key, str)
    if typ is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"config key {key}: expected {typ.__name__}, "
                          f"got {raw!r}") from None


def read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


@dataclass
class RunConfig:
    """Fully resolved settings for one command invocation."""

    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        values = dict(_DEFAULTS)
        if getattr(args, "config", None):
            values.update(read_config_file(args.config))
        for key in _DEFAULTS:
            flag_val = getattr(args, key, None)
            if flag_val is not None:
                values[key] = flag_val
        cfg = cls(values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        v = self.values
        if v["algo"] not in ("ocsvm", "svdd"):
            raise ConfigError(f"algo must be ocsvm or svdd, got {v['algo']!r}")
        if v["shift"] <= 0 or v["duration"] <= 0 or v["shift"] > v["duration"]:
            raise ConfigError("window must satisfy 0 < shift <= duration")
        if not (0.0 < v["split"] < 1.0):
            raise ConfigError("split fraction must be in (0, 1)")
        if v["min_tx"] < 0:
            raise ConfigError("min_tx must be >= 0")
        if v["part"] not in ("train", "test", "all"):
            raise ConfigError("part must be train, test or all")
        if v["rank_key"] not in ("acc_self", "acc"):
            raise ConfigError("rank_key must be acc_self or acc")
        try:
            parse_kernel_name(v["kernel"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def param(self) -> float:
        return self.values["nu"] if self.values["algo"] == "ocsvm" else self.values["cost"]

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(kind=parse_kernel_name(self.values["kernel"]))

    def window_config(self, key_mode: KeyMode = KeyMode.PER_USER) -> WindowConfig:
        return WindowConfig(self.values["duration"], self.values["shift"], key_mode)

    def parsed_window_grid(self) -> list[tuple[int, int]]:
        grid = []
        for token in self.values["window_grid"].split(","):
            token = token.strip()
            if not token:
                continue
            try:
                d_s, s_s = token.split(":")
                grid.append((int(d_s), int(s_s)))
            except ValueError:
                raise ConfigError(f"bad window grid entry {token!r}; "
                                  "expected D:S") from None
        if not grid:
            raise ConfigError("empty window grid")
        return grid

    def parsed_kernel_grid(self) -> list[KernelKind]:
        try:
            return [parse_kernel_name(k.strip())
                    for k in self.values["kernel_grid"].split(",") if k.strip()]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def parsed_param_grid(self) -> list[float]:
        try:
            return [float(p) for p in self.values["param_grid"].split(",")
                    if p.strip()]
        except ValueError:
            raise ConfigError("param grid must be a comma list of numbers") from None


# --------------------------------------------------------------------------
# Shared pipeline pieces.
# --------------------------------------------------------------------------

def _load_log(cfg: RunConfig) -> TransactionLog:
    if not cfg.log:
        raise ConfigError("no input log; pass --log PATH")
    path = Path(cfg.log)
    if not path.exists():
        raise DataError(f"log file not found: {path}")
    return parse_log_file(path)


def _prepared_split(cfg: RunConfig):
    log = _load_log(cfg)
    filtered = filter_users(log, cfg.min_tx)
    if len(filtered) == 0:
        raise DataError(f"no users with at least {cfg.min_tx} transactions")
    train_log, test_log = split_oldest(filtered, cfg.split)
    skipped = sorted(set(log.user_ids()) - set(filtered.user_ids()))
    return log, filtered, train_log, test_log, skipped


def _part_log(cfg: RunConfig, filtered, train_log, test_log) -> TransactionLog:
    return {"train": train_log, "test": test_log, "all": filtered}[cfg.part]


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_dir(cfg: RunConfig) -> Path:
    return _out_dir(cfg) / "models"


def _safe_name(user: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "@" for c in user)


def _write_json(path: Path, payload: dict, cfg: RunConfig) -> None:
    if cfg.stamp:
        payload = dict(payload)
        payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_models(cfg: RunConfig) -> tuple[dict, Vocabulary]:
    mdir = _model_dir(cfg)
    vocab_path = mdir / "vocabulary.json"
    if not vocab_path.exists():
        raise DataError(f"missing {vocab_path}; run the train command first")
    with open(vocab_path, "r", encoding="utf-8") as fh:
        vocab = Vocabulary.from_json_dict(json.load(fh))
    models = {}
    for path in sorted(mdir.glob("model_*.json")):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        cls = OcSvmModel if payload.get("type") == "ocsvm" else SvddModel
        model = cls.from_json_dict(payload)
        models[payload["user_id"]] = model
    if not models:
        raise DataError(f"no model files under {mdir}")
    return models, vocab


# --------------------------------------------------------------------------
# Commands.
# --------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    profiles = make_profiles(cfg.users, rng_seed=cfg.seed,
                             rate_per_min=cfg.rate,
                             values_per_field=cfg.values_per_field,
                             shared_fraction=cfg.overlap)
    synth = SynthConfig(users=profiles, n_hosts=cfg.hosts, weeks=cfg.weeks,
                        rng_seed=cfg.seed)
    log = generate_synthetic(synth)
    out = Path(cfg.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "synthetic.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_log_file(log, out)
    span = (log[-1].timestamp - log[0].timestamp) if len(log) else 0
    print(f"synth: {len(log)} transactions, {len(log.user_ids())} users, "
          f"{len(log.host_ids())} hosts, span {span}s -> {out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    _, filtered, train_log, test_log, skipped = _prepared_split(cfg)
    vocab = build_vocabulary(train_log)
    wcfg = cfg.window_config()
    wins = windows_by_key(window_stream(train_log, wcfg, vocab))
    mdir = _model_dir(cfg)
    mdir.mkdir(parents=True, exist_ok=True)
    _write_json(mdir / "vocabulary.json", vocab.to_json_dict(), cfg)

    if cfg.dump_windows:
        dump_windows([w for ws in wins.values() for w in ws], cfg.dump_windows)

    kernel = cfg.kernel_spec()
    users_summary = {}
    failures = 0
    for user in sorted(wins):
        vectors = [w.vector for w in wins[user]]
        try:
            model = train_one_class(cfg.algo, vectors, cfg.param, kernel,
                                    tol=cfg.tol)
        except SolverError as exc:
            failures += 1
            users_summary[user] = {"status": "failed", "error": str(exc),
                                   "windows": len(vectors)}
            print(f"train: {user}: FAILED ({exc})", file=sys.stderr)
            continue
        payload = model.to_json_dict()
        payload["user_id"] = user
        path = mdir / f"model_{_safe_name(user)}.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        threshold = model.rho if cfg.algo == "ocsvm" else model.r_squared
        users_summary[user] = {
            "status": "ok",
            "windows": len(vectors),
            "support_vectors": model.n_support,
            "threshold": threshold,
            "iterations": model.last_solve.iterations,
            "kkt_gap": model.last_solve.kkt_gap,
        }
        print(f"train: {user}: {len(vectors)} windows, "
              f"{model.n_support} SVs -> {path.name}")
    summary = {
        "algo": cfg.algo,
        "kernel": cfg.kernel,
        "param": cfg.param,
        "duration": cfg.duration,
        "shift": cfg.shift,
        "split": cfg.split,
        "min_tx": cfg.min_tx,
        "vocabulary_dim": vocab.total_dim,
        "train_transactions": len(train_log),
        "test_transactions": len(test_log),
        "skipped_users": skipped,
        "users": users_summary,
    }
    _write_json(mdir / "training_summary.json", summary, cfg)
    if failures:
        print(f"train: {failures} user model(s) failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    models, vocab = _load_models(cfg)
    _, filtered, train_log, test_log, _ = _prepared_split(cfg)
    part = _part_log(cfg, filtered, train_log, test_log)
    wins = windows_by_key(window_stream(part, cfg.window_config(), vocab))
    report = evaluate_pairwise(models, {u: wins.get(u, []) for u in models},
                               workers=cfg.workers)
    out = _out_dir(cfg)
    report.write_confusion_csv(out / "confusion.csv")
    _write_json(out / "evaluation_summary.json", report.summary_dict(), cfg)
    if cfg.figures:
        figures.confusion_figure(report, out / "confusion.png")
    print(f"evaluate[{cfg.part}]: ACC_self {report.acc_self:.1f}  "
          f"ACC_other {report.acc_other:.1f}  ACC {report.acc:.1f}")
    return EXIT_OK


def cmd_gridsearch(cfg: RunConfig) -> int:
    _, _, train_log, _, _ = _prepared_split(cfg)
    vocab = build_vocabulary(train_log)
    out = _out_dir(cfg)
    kernel = cfg.kernel_spec()

    results = grid_search_window(train_log, cfg.parsed_window_grid(),
                                 cfg.algo, cfg.param, kernel, vocab=vocab,
                                 rank_key=cfg.rank_key, tol=cfg.tol,
                                 workers=cfg.workers)
    with open(out / "window_stage.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "duration", "shift", "acc_self",
                         "acc_other", "acc", "error"])
        for rank, r in enumerate(results, start=1):
            writer.writerow([rank, r.duration_d, r.shift_s,
                             f"{r.acc_self:.6g}", f"{r.acc_other:.6g}",
                             f"{r.acc:.6g}", r.error or ""])
    if cfg.figures:
        figures.window_grid_figure(results, out / "window_stage.png")
    best_ws = results[0]
    if best_ws.error is not None:
        raise EvaluationError(f"window stage failed: {best_ws.error}")
    print(f"gridsearch stage 1: retained D={best_ws.duration_d}s "
          f"S={best_ws.shift_s}s (ACC_self {best_ws.acc_self:.1f}, "
          f"ACC {best_ws.acc:.1f})")

    wcfg = WindowConfig(best_ws.duration_d, best_ws.shift_s, KeyMode.PER_USER)
    wins = windows_by_key(window_stream(train_log, wcfg, vocab))
    kernel_grid = cfg.parsed_kernel_grid()
    param_grid = cfg.parsed_param_grid()
    chosen = {}
    with open(out / "model_stage.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user", "kernel", "param", "acc_self", "acc_other",
                         "acc", "chosen", "error"])
        for user in sorted(wins):
            own = wins[user]
            others = [w for u, ws in sorted(wins.items()) if u != user
                      for w in ws]
            result = grid_search_model(own, others, kernel_grid, param_grid,
                                       cfg.algo, base_kernel=kernel,
                                       tol=cfg.tol, workers=cfg.workers)
            best = result.best
            chosen[user] = {"kernel": best.kernel_kind.value,
                            "param": best.param, "acc": best.acc}
            for cell in result.cells:
                is_best = (cell.kernel_kind is best.kernel_kind
                           and cell.param == best.param and cell.error is None)
                writer.writerow([
                    user, cell.kernel_kind.value, cell.param,
                    "" if cell.error else f"{cell.acc_self:.6g}",
                    "" if cell.error else f"{cell.acc_other:.6g}",
                    "" if cell.error else f"{cell.acc:.6g}",
                    "1" if is_best else "0",
                    cell.error or "",
                ])
            print(f"gridsearch stage 2: {user}: kernel={best.kernel_kind.value} "
                  f"param={best.param} ACC={best.acc:.1f}")
    _write_json(out / "chosen_params.json", {
        "window": {"duration": best_ws.duration_d, "shift": best_ws.shift_s},
        "algo": cfg.algo,
        "users": chosen,
    }, cfg)
    return EXIT_OK


def cmd_identify(cfg: RunConfig) -> int:
    if not cfg.host:
        raise ConfigError("identify needs --host HOST_ID")
    models, vocab = _load_models(cfg)
    _, filtered, train_log, test_log, _ = _prepared_split(cfg)
    part = _part_log(cfg, filtered, train_log, test_log)
    wcfg = cfg.window_config(KeyMode.PER_HOST)
    host_log, host_windows = identify_mod.host_windows_for(
        part, cfg.host, wcfg, vocab)
    if not host_windows:
        raise DataError(f"no transactions for host {cfg.host!r} in the "
                        f"{cfg.part} part")
    timeline = identify_mod.score_host_stream(models, host_windows)
    identify_mod.attach_ground_truth(timeline, host_log, wcfg)
    estimates = identify_mod.smooth_identity(timeline, cfg.k)
    out = _out_dir(cfg)
    identify_mod.write_timeline_csv(out / "timeline.csv", timeline, estimates)
    if cfg.figures:
        figures.timeline_figure(timeline, estimates, out / "timeline.png")
    correct = sum(1 for t, e in zip(timeline, estimates)
                  if t.true_user and e.estimated_user == t.true_user)
    print(f"identify: host {cfg.host}, {len(timeline)} windows, k={cfg.k}, "
          f"{100.0 * correct / len(timeline):.1f}% attributed to ground truth")
    return EXIT_OK


def cmd_novelty(cfg: RunConfig) -> int:
    log = _load_log(cfg)
    filtered = filter_users(log, cfg.min_tx)
    if len(filtered) == 0:
        raise DataError(f"no users with at least {cfg.min_tx} transactions")
    curve = novelty_curves(filtered, cfg.window_config(),
                           weeks_range=range(1, cfg.weeks_max + 1))
    out = _out_dir(cfg)
    curve.write_csv(out / "novelty.csv")
    if cfg.figures:
        figures.novelty_figure(curve, out / "novelty.png")
    print(f"novelty: {len(filtered.user_ids())} users, "
          f"weeks 1..{cfg.weeks_max} -> {out / 'novelty.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing.
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="webprof",
        description="Profile users from web-transaction logs with one-class "
                    "models (nu-OC-SVM / SVDD).")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--log", help="input transaction log CSV")
        p.add_argument("--out", help="output directory (or file for synth)")
        p.add_argument("--algo", choices=["ocsvm", "svdd"])
        p.add_argument("--duration", type=int, help="window duration D in seconds")
        p.add_argument("--shift", type=int, help="window shift S in seconds")
        p.add_argument("--nu", type=float, help="OC-SVM nu in (0, 1]")
        p.add_argument("--cost", type=float, help="SVDD C weight")
        p.add_argument("--kernel", help="linear | poly | rbf | sigmoid")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--min-tx", dest="min_tx", type=int,
                       help="drop users with fewer transactions")
        p.add_argument("--split", type=float, help="train fraction in (0, 1)")
        p.add_argument("--tol", type=float, help="solver KKT tolerance")
        p.add_argument("--figures", dest="figures", action="store_const",
                       const=True, help="render PNG figures (default)")
        p.add_argument("--no-figures", dest="figures", action="store_const",
                       const=False)
        p.add_argument("--stamp", dest="stamp", action="store_const",
                       const=True, help="add a timestamp line to JSON reports")

    p_synth = sub.add_parser("synth", help="generate a synthetic log")
    common(p_synth)
    p_synth.add_argument("--users", type=int)
    p_synth.add_argument("--hosts", type=int)
    p_synth.add_argument("--weeks", type=float)
    p_synth.add_argument("--rate", type=float, help="transactions per minute per user")
    p_synth.add_argument("--overlap", type=float,
                         help="cross-user behavioural overlap in [0, 1]")
    p_synth.add_argument("--values-per-field", dest="values_per_field", type=int)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train one model per user")
    common(p_train)
    p_train.add_argument("--dump-windows", dest="dump_windows",
                         help="write the training windows to this CSV")
    p_train.set_defaults(func=cmd_train)

    p_grid = sub.add_parser("gridsearch",
                            help="two-stage parameter search (window, then per-user)")
    common(p_grid)
    p_grid.add_argument("--window-grid", dest="window_grid",
                        help="comma list of D:S pairs in seconds")
    p_grid.add_argument("--kernel-grid", dest="kernel_grid",
                        help="comma list of kernel names")
    p_grid.add_argument("--param-grid", dest="param_grid",
                        help="comma list of nu/C values")
    p_grid.add_argument("--rank-key", dest="rank_key",
                        choices=["acc_self", "acc"])
    p_grid.set_defaults(func=cmd_gridsearch)

    p_eval = sub.add_parser("evaluate", help="pairwise acceptance confusion matrix")
    common(p_eval)
    p_eval.add_argument("--part", choices=["train", "test", "all"],
                        help="which split to evaluate on (default test)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_ident = sub.add_parser("identify", help="identify users on a host stream")
    common(p_ident)
    p_ident.add_argument("--host", help="host id to monitor")
    p_ident.add_argument("--k", type=int, help="smoothing lookback in windows")
    p_ident.add_argument("--part", choices=["train", "test", "all"])
    p_ident.set_defaults(func=cmd_identify)

    p_nov = sub.add_parser("novelty", help="temporal novelty curves")
    common(p_nov)
    p_nov.add_argument("--weeks-max", dest="weeks_max", type=int,
                       help="largest epoch delimiter in weeks")
    p_nov.set_defaults(func=cmd_novelty)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.resolve(args)
        return args.func(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, LogParseError, SynthConfigError, EvaluationError,
            FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
