import numpy as np
import pytest

from conftest import make_tx
from webprof.evaluation import (EvaluationError, acceptance_ratio,
                                evaluate_pairwise, grid_search_model,
                                grid_search_window, novel_value_set,
                                novelty_curves, novelty_features,
                                novelty_windows, train_one_class)
from webprof.features import (KeyMode, Window, WindowConfig, build_vocabulary,
                              window_stream, windows_by_key)
from webprof.kernels import KernelKind, KernelSpec
from webprof.logdata import (SECONDS_PER_WEEK, SynthConfig, TransactionLog,
                             generate_synthetic, make_profiles, split_oldest)


def synth_log(n_users=3, weeks=0.01, seed=9, shared=0.0, rate=2.0):
    profiles = make_profiles(n_users, rng_seed=seed, rate_per_min=rate,
                             shared_fraction=shared)
    return generate_synthetic(SynthConfig(users=profiles, n_hosts=n_users,
                                          weeks=weeks, rng_seed=seed))


def train_windows(log, d=60, s=30):
    vocab = build_vocabulary(log)
    wins = windows_by_key(window_stream(
        log, WindowConfig(d, s, KeyMode.PER_USER), vocab))
    return vocab, wins


class FixedModel:
    """Accepts exactly the vectors in its allow-set."""

    def __init__(self, allowed):
        self.allowed = set(allowed)

    def accepts(self, vectors):
        return np.array([v in self.allowed for v in vectors])


class TestAcceptanceRatio:
    def test_all_accepted(self):
        wins = _dummy_windows(4)
        model = FixedModel([w.vector for w in wins])
        assert acceptance_ratio(model, wins) == 100.0

    def test_three_of_four(self):
        wins = _dummy_windows(4)
        model = FixedModel([w.vector for w in wins[:3]])
        assert acceptance_ratio(model, wins) == 75.0

    def test_empty_error(self):
        with pytest.raises(EvaluationError):
            acceptance_ratio(FixedModel([]), [])


def _dummy_windows(n, key="u", dim=12):
    from webprof.features import FeatureVector
    return [Window(key=key, start=30 * i,
                   vector=FeatureVector(dim, {9 + (i % (dim - 9)): 1.0,
                                              0: 1.0 if i % 2 else 0.0}),
                   tx_count=1) for i in range(n)]


class TestEvaluatePairwise:
    def test_single_user_flagged(self):
        wins = _dummy_windows(5)
        report = evaluate_pairwise({"u": FixedModel([w.vector for w in wins])},
                                   {"u": wins})
        assert report.single_user
        assert report.acc_other == 0.0
        assert report.acc_self == 100.0
        assert report.acc == 100.0

    def test_missing_test_set_names_user(self):
        with pytest.raises(EvaluationError, match="userB"):
            evaluate_pairwise({"userA": FixedModel([]), "userB": FixedModel([])},
                              {"userA": _dummy_windows(2)})

    def test_acc_identity_exact(self):
        wins_a = _dummy_windows(6, "a")
        wins_b = _dummy_windows(4, "b")
        models = {"a": FixedModel([w.vector for w in wins_a[:3]]),
                  "b": FixedModel([w.vector for w in wins_b])}
        report = evaluate_pairwise(models, {"a": wins_a, "b": wins_b})
        assert report.acc == report.acc_self - report.acc_other

    def test_diagonal_matches_acceptance_ratio(self):
        log = synth_log(2)
        vocab, wins = train_windows(log)
        models = {u: train_one_class("ocsvm", [w.vector for w in ws], 0.3,
                                     KernelSpec(KernelKind.RBF))
                  for u, ws in wins.items()}
        report = evaluate_pairwise(models, wins)
        for u in wins:
            assert report.per_pair[(u, u)] == acceptance_ratio(models[u], wins[u])

    def test_disjoint_users_separate_cleanly(self):
        log = synth_log(2, shared=0.0)
        vocab, wins = train_windows(log)
        models = {u: train_one_class("ocsvm", [w.vector for w in ws], 0.2,
                                     KernelSpec(KernelKind.RBF))
                  for u, ws in wins.items()}
        report = evaluate_pairwise(models, wins)
        assert report.acc_self > 70.0
        assert report.acc_other < 10.0

    def test_worker_count_does_not_change_result(self):
        log = synth_log(3)
        vocab, wins = train_windows(log)
        models = {u: train_one_class("ocsvm", [w.vector for w in ws], 0.3,
                                     KernelSpec(KernelKind.RBF))
                  for u, ws in wins.items()}
        seq = evaluate_pairwise(models, wins, workers=1)
        par = evaluate_pairwise(models, wins, workers=4)
        assert seq.per_pair == par.per_pair

    def test_confusion_csv_layout(self, tmp_path):
        wins_a = _dummy_windows(2, "a")
        wins_b = _dummy_windows(2, "b")
        models = {"a": FixedModel([w.vector for w in wins_a]),
                  "b": FixedModel([])}
        report = evaluate_pairwise(models, {"a": wins_a, "b": wins_b})
        path = tmp_path / "confusion.csv"
        report.write_confusion_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "model,t_a,t_b"
        assert lines[1].startswith("m_a,100,")
        assert lines[2].startswith("m_b,0,")


class TestGridSearchWindow:
    def test_single_cell(self):
        log = synth_log(2)
        results = grid_search_window(log, [(60, 30)], "ocsvm", 0.3,
                                     KernelSpec(KernelKind.RBF))
        assert len(results) == 1
        r = results[0]
        assert (r.duration_d, r.shift_s) == (60, 30)
        assert r.acc == pytest.approx(r.acc_self - r.acc_other)

    def test_requires_two_users(self):
        log = synth_log(1)
        with pytest.raises(EvaluationError):
            grid_search_window(log, [(60, 30)], "ocsvm", 0.3,
                               KernelSpec(KernelKind.RBF))

    def test_ranking_deterministic_and_sorted(self):
        log = synth_log(3, weeks=0.008)
        grid = [(60, 6), (60, 30), (300, 60)]
        a = grid_search_window(log, grid, "ocsvm", 0.3,
                               KernelSpec(KernelKind.RBF))
        b = grid_search_window(log, grid, "ocsvm", 0.3,
                               KernelSpec(KernelKind.RBF))
        assert [(r.duration_d, r.shift_s) for r in a] == \
               [(r.duration_d, r.shift_s) for r in b]
        selfs = [r.acc_self for r in a]
        assert selfs == sorted(selfs, reverse=True)

    def test_rank_by_acc(self):
        log = synth_log(3, weeks=0.008)
        grid = [(60, 30), (300, 60)]
        results = grid_search_window(log, grid, "ocsvm", 0.3,
                                     KernelSpec(KernelKind.RBF), rank_key="acc")
        accs = [r.acc for r in results]
        assert accs == sorted(accs, reverse=True)


class TestGridSearchModel:
    def _windows(self):
        log = synth_log(2)
        vocab, wins = train_windows(log)
        users = sorted(wins)
        return wins[users[0]], wins[users[1]]

    def test_single_cell_passthrough(self):
        own, other = self._windows()
        result = grid_search_model(own, other, [KernelKind.RBF], [0.3], "ocsvm")
        assert len(result.cells) == 1
        assert result.best is result.cells[0]

    def test_full_table_and_chosen(self):
        own, other = self._windows()
        result = grid_search_model(own, other,
                                   [KernelKind.LINEAR, KernelKind.RBF],
                                   [0.5, 0.2], "ocsvm")
        assert len(result.cells) == 4
        best_acc = max(c.acc for c in result.cells if c.error is None)
        assert result.best.acc == best_acc

    def test_tie_breaks_kernel_order_then_larger_param(self):
        own = _dummy_windows(4, "u")
        other = []
        always = [w.vector for w in own]

        # with no rejections anywhere every cell ties at ACC = 100 - 0
        result = grid_search_model(own, other,
                                   [KernelKind.RBF, KernelKind.LINEAR],
                                   [0.5, 0.9], "ocsvm")
        ok = [c for c in result.cells if c.error is None]
        if len({round(c.acc, 9) for c in ok}) == 1:
            assert result.best.kernel_kind is KernelKind.RBF
            assert result.best.param == max(p for c in ok
                                            for p in [c.param]
                                            if c.kernel_kind is KernelKind.RBF)

    def test_infeasible_cells_kept_with_error(self):
        own, other = self._windows()
        # C far below 1/l is infeasible for SVDD
        result = grid_search_model(own, other, [KernelKind.LINEAR],
                                   [0.5, 1e-9], "svdd")
        errs = [c for c in result.cells if c.error is not None]
        assert len(errs) == 1 and errs[0].param == 1e-9
        assert result.best.param == 0.5

    def test_all_cells_failed(self):
        own, other = self._windows()
        with pytest.raises(EvaluationError):
            grid_search_model(own, other, [KernelKind.LINEAR], [1e-9], "svdd")

    def test_negative_acc_preserved(self):
        # own windows carry noise around a center, the "other" windows sit
        # exactly on it: with a large nu most own windows are rejected while
        # every centered window is accepted, driving ACC below zero
        from webprof.features import FeatureVector
        rng = np.random.default_rng(4)
        own = [Window("a", 30 * i,
                      FeatureVector(12, {9: float(0.5 + 0.4 * (rng.random() - 0.5)),
                                         10: float(rng.random())}), 1)
               for i in range(30)]
        other = [Window("b", 30 * i, FeatureVector(12, {9: 0.5, 10: 0.5}), 1)
                 for i in range(10)]
        result = grid_search_model(own, other, [KernelKind.RBF], [0.9], "ocsvm")
        cell = result.cells[0]
        assert cell.error is None
        assert cell.acc < 0
        assert result.best is cell  # argmax must tolerate negative values


class TestNovelty:
    def _user_log(self):
        txs = []
        week = SECONDS_PER_WEEK
        # week 0: categories a, b; week 1: b, c; week 2: c
        for i, (offset, cat) in enumerate([
                (0, "a"), (100, "b"), (week + 50, "b"), (week + 60, "c"),
                (2 * week + 10, "c")]):
            txs.append(make_tx(ts=1000 + offset, category=cat))
        return TransactionLog(txs)

    def test_subset_of_observed_gives_zero(self):
        log = self._user_log()
        assert novelty_features(log, 2, "category") == 0.0

    def test_empty_observed_gives_one(self):
        log = self._user_log()
        assert novelty_features(log, 0, "category") == 1.0

    def test_partial_novelty(self):
        log = self._user_log()
        # observed week 0: {a, b}; subsequent: {b, c} -> novel {c} of 2
        assert novelty_features(log, 1, "category") == 0.5

    def test_no_subsequent_values_gives_zero(self):
        log = self._user_log()
        assert novelty_features(log, 50, "category") == 0.0

    def test_novel_set_containment(self):
        log = self._user_log()
        prev = None
        for t in range(0, 4):
            cur = novel_value_set(log, t, "category")
            if prev is not None:
                assert cur <= prev
            prev = cur

    def test_window_novelty_identity_and_disjoint(self):
        wins = _dummy_windows(6)
        assert novelty_windows(wins, wins) == 0.0
        other = _dummy_windows(6, dim=13)
        assert novelty_windows(wins, other) == 1.0

    def test_window_novelty_empty_observed(self):
        wins = _dummy_windows(3)
        assert novelty_windows([], wins) == 1.0

    def test_window_novelty_empty_subsequent_error(self):
        with pytest.raises(EvaluationError):
            novelty_windows(_dummy_windows(3), [])

    def test_curve_rows_and_csv(self, tmp_path):
        log = synth_log(2, weeks=0.4, rate=0.2)
        curve = novelty_curves(log, WindowConfig(60, 30),
                               weeks_range=range(1, 3))
        fields = {r[1] for r in curve.rows}
        assert fields == {"category", "subtype", "application_type", "windows"}
        assert all(0.0 <= r[2] <= 1.0 for r in curve.rows)
        path = tmp_path / "novelty.csv"
        curve.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "t_weeks,field,mean,variance"
