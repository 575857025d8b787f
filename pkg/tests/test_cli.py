import json
from pathlib import Path

import pytest

from webprof.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def file_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def small_log(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "log.csv"
    code = run("synth", "--out", path, "--users", "3", "--hosts", "2",
               "--weeks", "0.006", "--rate", "2.0", "--seed", "11")
    assert code == 0
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, small_log):
    out = tmp_path_factory.mktemp("trained")
    code = run("train", "--log", small_log, "--out", out, "--min-tx", "5",
               "--nu", "0.2", "--seed", "11")
    assert code == 0
    return out


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for path in (a, b):
            assert run("synth", "--out", path, "--users", "2",
                       "--weeks", "0.004", "--seed", "3") == 0
        assert a.read_bytes() == b.read_bytes()

    def test_user_count(self, tmp_path):
        path = tmp_path / "log.csv"
        assert run("synth", "--out", path, "--users", "4", "--hosts", "3",
                   "--weeks", "0.004", "--seed", "5") == 0
        users = {line.split(",")[1] for line in
                 path.read_text().splitlines()[1:]}
        assert users == {"user_0", "user_1", "user_2", "user_3"}

    def test_span_roughly_weeks(self, tmp_path):
        path = tmp_path / "log.csv"
        weeks = 0.02
        assert run("synth", "--out", path, "--users", "2", "--weeks", weeks,
                   "--rate", "2.0", "--seed", "7") == 0
        stamps = [int(line.split(",")[0]) for line in
                  path.read_text().splitlines()[1:]]
        span = max(stamps) - min(stamps)
        assert span <= weeks * 604800
        assert span >= 0.8 * weeks * 604800


class TestTrain:
    def test_model_files_and_summary(self, trained):
        models = sorted(p.name for p in (trained / "models").glob("model_*.json"))
        assert models == ["model_user_0.json", "model_user_1.json",
                          "model_user_2.json"]
        assert (trained / "models" / "vocabulary.json").exists()
        summary = json.loads((trained / "models" / "training_summary.json")
                             .read_text())
        assert set(summary["users"]) == {"user_0", "user_1", "user_2"}
        for info in summary["users"].values():
            assert info["status"] == "ok"
            assert info["support_vectors"] >= 1

    def test_min_tx_filter_lists_skipped(self, small_log, tmp_path):
        out = tmp_path / "out"
        assert run("train", "--log", small_log, "--out", out,
                   "--min-tx", "100000") == 3  # nobody survives: data error
        # moderate threshold: everyone survives, none skipped
        assert run("train", "--log", small_log, "--out", out,
                   "--min-tx", "5", "--nu", "0.2") == 0
        summary = json.loads((out / "models" / "training_summary.json")
                             .read_text())
        assert summary["skipped_users"] == []

    def test_single_user_log(self, tmp_path):
        log = tmp_path / "one.csv"
        assert run("synth", "--out", log, "--users", "1", "--weeks", "0.004",
                   "--seed", "2") == 0
        out = tmp_path / "out"
        assert run("train", "--log", log, "--out", out, "--min-tx", "1",
                   "--nu", "0.3") == 0
        assert len(list((out / "models").glob("model_*.json"))) == 1


class TestEvaluate:
    def test_reports_written(self, small_log, trained):
        assert run("evaluate", "--log", small_log, "--out", trained,
                   "--min-tx", "5") == 0
        assert (trained / "confusion.csv").exists()
        assert (trained / "confusion.png").exists()
        summary = json.loads((trained / "evaluation_summary.json").read_text())
        assert summary["acc"] == pytest.approx(
            summary["acc_self"] - summary["acc_other"])

    def test_train_part_diagonal_matches_training_windows(
            self, small_log, tmp_path):
        out = tmp_path / "out"
        assert run("train", "--log", small_log, "--out", out, "--min-tx", "5",
                   "--nu", "0.2") == 0
        assert run("evaluate", "--log", small_log, "--out", out,
                   "--min-tx", "5", "--part", "train", "--no-figures") == 0
        rows = (out / "confusion.csv").read_text().splitlines()
        users = rows[0].split(",")[1:]
        diag = [float(rows[i + 1].split(",")[i + 1]) for i in range(len(users))]
        # nu=0.2 caps training rejections near 20%
        assert all(d >= 60.0 for d in diag)


class TestGridsearch:
    def test_two_stage_outputs(self, small_log, tmp_path):
        out = tmp_path / "gs"
        code = run("gridsearch", "--log", small_log, "--out", out,
                   "--min-tx", "5", "--nu", "0.3",
                   "--window-grid", "60:30,120:60",
                   "--kernel-grid", "linear,rbf",
                   "--param-grid", "0.5,0.2")
        assert code == 0
        window_rows = (out / "window_stage.csv").read_text().splitlines()
        assert window_rows[0] == "rank,duration,shift,acc_self,acc_other,acc,error"
        assert len(window_rows) == 3
        chosen = json.loads((out / "chosen_params.json").read_text())
        assert set(chosen["users"]) == {"user_0", "user_1", "user_2"}
        model_rows = (out / "model_stage.csv").read_text().splitlines()
        assert len(model_rows) == 1 + 3 * 4  # header + users x cells
        assert (out / "window_stage.png").exists()

    def test_single_cell_grids(self, small_log, tmp_path):
        out = tmp_path / "gs1"
        code = run("gridsearch", "--log", small_log, "--out", out,
                   "--min-tx", "5", "--window-grid", "60:30",
                   "--kernel-grid", "rbf", "--param-grid", "0.3",
                   "--no-figures")
        assert code == 0
        chosen = json.loads((out / "chosen_params.json").read_text())
        assert chosen["window"] == {"duration": 60, "shift": 30}
        for info in chosen["users"].values():
            assert info == {"kernel": "rbf", "param": 0.3, "acc": info["acc"]}


class TestIdentify:
    def test_timeline_csv(self, small_log, trained):
        hosts = {line.split(",")[2] for line in
                 Path(small_log).read_text().splitlines()[1:]}
        host = sorted(hosts)[0]
        code = run("identify", "--log", small_log, "--out", trained,
                   "--min-tx", "5", "--host", host, "--k", "5",
                   "--part", "all")
        assert code == 0
        lines = (trained / "timeline.csv").read_text().splitlines()
        assert lines[0] == ("window_start,true_user,estimated_user,"
                            "confidence,accepted")
        assert len(lines) > 1
        assert (trained / "timeline.png").exists()

    def test_unknown_host_is_data_error(self, small_log, trained):
        assert run("identify", "--log", small_log, "--out", trained,
                   "--min-tx", "5", "--host", "no_such_host") == 3

    def test_missing_host_flag_is_config_error(self, small_log, trained):
        assert run("identify", "--log", small_log, "--out", trained,
                   "--min-tx", "5") == 2


class TestNovelty:
    def test_curves_written(self, small_log, tmp_path):
        out = tmp_path / "nov"
        assert run("novelty", "--log", small_log, "--out", out,
                   "--min-tx", "5", "--weeks-max", "2") == 0
        lines = (out / "novelty.csv").read_text().splitlines()
        assert lines[0] == "t_weeks,field,mean,variance"
        assert (out / "novelty.png").exists()


class TestExitCodes:
    def test_missing_log_is_data_error(self, tmp_path):
        assert run("train", "--log", tmp_path / "nope.csv",
                   "--out", tmp_path) == 3

    def test_malformed_log_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,u,h,PATCH,HTTP,,,,Minimal,0\n")
        assert run("train", "--log", bad, "--out", tmp_path) == 3

    def test_bad_split_is_config_error(self, small_log, tmp_path):
        assert run("train", "--log", small_log, "--out", tmp_path,
                   "--split", "1.5") == 2

    def test_bad_window_is_config_error(self, small_log, tmp_path):
        assert run("train", "--log", small_log, "--out", tmp_path,
                   "--duration", "30", "--shift", "60") == 2

    def test_infeasible_svdd_cost_is_solver_failure(self, small_log, tmp_path):
        assert run("train", "--log", small_log, "--out", tmp_path / "x",
                   "--min-tx", "5", "--algo", "svdd", "--cost", "1e-9") == 4


class TestConfigFile:
    def test_flags_override_file(self, small_log, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("min_tx = 100000\nnu = 0.2\n# comment\n")
        out = tmp_path / "out"
        # file alone would filter everyone out -> flag must win
        assert run("train", "--config", cfg, "--log", small_log,
                   "--out", out, "--min-tx", "5") == 0

    def test_unknown_key_rejected(self, small_log, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("frobnicate = 1\n")
        assert run("train", "--config", cfg, "--log", small_log,
                   "--out", tmp_path) == 2

    def test_bad_value_rejected(self, small_log, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("min_tx = soon\n")
        assert run("train", "--config", cfg, "--log", small_log,
                   "--out", tmp_path) == 2


class TestReproducibility:
    def test_train_and_reports_byte_identical(self, small_log, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run("train", "--log", small_log, "--out", out,
                       "--min-tx", "5", "--nu", "0.2") == 0
            assert run("evaluate", "--log", small_log, "--out", out,
                       "--min-tx", "5") == 0
            assert run("novelty", "--log", small_log, "--out", out,
                       "--min-tx", "5", "--weeks-max", "1") == 0
            outs.append(file_bytes(out))
        assert outs[0].keys() == outs[1].keys()
        for name in outs[0]:
            assert outs[0][name] == outs[1][name], f"{name} differs"

    def test_stamp_flag_adds_timestamp(self, small_log, tmp_path):
        out = tmp_path / "stamped"
        assert run("train", "--log", small_log, "--out", out, "--min-tx", "5",
                   "--stamp") == 0
        summary = json.loads((out / "models" / "training_summary.json")
                             .read_text())
        assert "generated_at" in summary
