import json
import subprocess
import sys

import numpy as np
import pytest

from ocon import cli
from ocon.profiling import read_csv

FAST = {"mlp": {"hidden_layers": [8]}, "stop": {"epochs": 2, "max_batch_sets": 1}}


@pytest.fixture(scope="module")
def ingested(tmp_path_factory):
    out = tmp_path_factory.mktemp("ingest")
    assert cli.main(["ingest", "--synthetic", "0", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def fast_config(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "fast.json"
    p.write_text(json.dumps(FAST))
    return p


@pytest.fixture(scope="module")
def trained(tmp_path_factory, ingested, fast_config):
    out = tmp_path_factory.mktemp("train")
    rc = cli.main(["train", "--data", str(ingested / "records.csv"), "--variant", "tt12",
                   "--config", str(fast_config), "--seed", "3", "--jobs", "1", "--out", str(out)])
    assert rc == 0
    return out


def test_ingest_outputs(ingested, capsys):
    stats = (ingested / "class_stats.csv").read_text().splitlines()
    assert stats[-1].startswith("TOTAL,1597,301,221,527,548")
    for v in ("ss3", "ss3-f0", "tt12", "tt12-f0"):
        assert (ingested / f"features_{v}.ocfs").exists()
    assert (ingested / "pmd.svg").exists()
    manifest = json.loads((ingested / "manifest.json").read_text())
    assert manifest["command"] == "ingest" and "numpy" in manifest["versions"]


def test_ingest_deterministic(tmp_path, ingested):
    cli.main(["ingest", "--synthetic", "0", "--out", str(tmp_path)])
    assert (tmp_path / "records.csv").read_bytes() == (ingested / "records.csv").read_bytes()


def test_ingest_bad_column_map(tmp_path, ingested, capsys):
    cmap = {"filename": "filename", "f0": "f0",
            "formants": {k: k for k in ["F1@10", "F1@50", "F1@SS", "F1@80", "F2@10", "F2@50", "F2@SS",
                                        "F2@80", "F3@10", "F3@50", "F3@SS", "F3@99"]}}
    cmap["formants"]["F3@80"] = cmap["formants"].pop("F3@99")
    cmap["formants"]["F3@80"] = "F3@99"
    (tmp_path / "map.json").write_text(json.dumps(cmap))
    rc = cli.main(["ingest", "--data", str(ingested / "records.csv"), "--column-map",
                   str(tmp_path / "map.json"), "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_DATA
    assert "F3@99" in capsys.readouterr().err


def test_missing_data_is_usage_error(tmp_path):
    assert cli.main(["ingest", "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_missing_file_is_data_error(tmp_path):
    assert cli.main(["ingest", "--data", str(tmp_path / "nope.dat"), "--out", str(tmp_path)]) == cli.EXIT_DATA


def test_argparse_usage_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--variant", "bogus", "--out", "x"])
    assert exc.value.code == 2


def test_train_outputs(trained):
    ck = trained / "checkpoint"
    assert len(list(ck.glob("*.ocfs"))) == 12
    manifest = json.loads((trained / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["config"]["variant"] == "tt12"
    assert manifest["config"]["mlp"]["hidden_layers"] == [8]
    assert len(list((trained / "curves").glob("*.csv"))) == 12
    assert (trained / "training_curves.svg").exists()
    reports = json.loads((trained / "train_reports.json").read_text())
    assert [r["class_name"] for r in reports][:2] == ["ae", "ah"]


def test_train_defaults_and_speaker(tmp_path, ingested):
    args = cli.build_parser().parse_args(["train", "--synthetic", "--task", "speaker", "--out", "x"])
    variant, task, seed, jobs, head, mlp, stops, split, resolved = cli._train_settings(args)
    assert (mlp.hidden_layers, mlp.lr, mlp.optimizer, mlp.keep_input, mlp.keep_hidden, mlp.batch_norm,
            mlp.l2_lambda, mlp.batch_size) == ((100,), 1e-4, "adam", 0.8, 0.5, True, 1e-4, 32)
    assert [s.loss_threshold for s in stops] == [0.36, 0.08, 0.45]
    assert [s.accuracy_threshold for s in stops] == [0.8, 0.97, 0.8]


def test_seed_resolution(monkeypatch):
    monkeypatch.setenv("OCON_SEED", "17")
    assert cli.resolve_seed(None, {}) == 17
    assert cli.resolve_seed(None, {"seed": 4}) == 4
    assert cli.resolve_seed(2, {"seed": 4}) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"variant": "ss3", "seed": 9, "jobs": 2}))
    args = cli.build_parser().parse_args(["train", "--config", str(cfg), "--variant", "tt12-f0",
                                          "--out", "x"])
    variant, task, seed, jobs, *_ = cli._train_settings(args)
    assert (variant.value, seed, jobs) == ("tt12-f0", 9, 2)


def test_invalid_config_is_usage_error(tmp_path, ingested):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mlp": {"lr": -1}}))
    assert cli.main(["train", "--synthetic", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_same_seed_identical_checkpoints(tmp_path, ingested, fast_config, trained):
    rc = cli.main(["train", "--data", str(ingested / "records.csv"), "--variant", "tt12",
                   "--config", str(fast_config), "--seed", "3", "--jobs", "2", "--out", str(tmp_path)])
    assert rc == 0
    for f in sorted((trained / "checkpoint").iterdir()):
        assert (tmp_path / "checkpoint" / f.name).read_bytes() == f.read_bytes()


def test_eval(tmp_path, trained, capsys):
    rc = cli.main(["eval", "--checkpoint", str(trained), "--synthetic", "0", "--out", str(tmp_path)])
    assert rc == 0
    acc = (tmp_path / "accuracy_table.csv").read_text().splitlines()
    assert acc[0].startswith("one_class,accuracy,precision,recall,f1,tp,fp,fn,tn") and len(acc) == 13
    assert len((tmp_path / "rates_table.csv").read_text().splitlines()) == 13
    assert (tmp_path / "roc.svg").exists() and (tmp_path / "det.svg").exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert 0 <= summary["ocon_accuracy"] <= 1 and len(summary["auc"]) == 12
    assert "ocon_accuracy=" in capsys.readouterr().out


def test_infer_single_row(tmp_path, trained, capsys):
    row = ",".join(["5.0"] * 12)
    (tmp_path / "f.csv").write_text("header," * 11 + "h\n" + row + "\n")
    assert cli.main(["infer", "--checkpoint", str(trained / "checkpoint"), "--features",
                     str(tmp_path / "f.csv")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    cells = lines[1].split(",")
    probs = np.array(cells[3:], dtype=float)
    assert probs.size == 12 and int(cells[1]) == int(np.argmax(probs))


def test_infer_wrong_width(tmp_path, trained):
    (tmp_path / "f.csv").write_text("1,2,3\n")
    assert cli.main(["infer", "--checkpoint", str(trained), "--features", str(tmp_path / "f.csv")]) == cli.EXIT_DATA


def test_search_plan(capsys):
    assert cli.main(["search", "--plan-only"]) == 0
    out = capsys.readouterr().out
    for n in ("648 cycles", "864 cycles", "360 cycles"):
        assert n in out


def test_search_custom_stage(tmp_path, capsys):
    stage = {"name": "mini", "swept": {"lr": [0.01, 0.001]}, "fixed": {"hidden_nodes": 4},
             "folds": 2, "epochs": 2, "classes": [0, 1]}
    (tmp_path / "s.json").write_text(json.dumps(stage))
    rc = cli.main(["search", "--stage", str(tmp_path / "s.json"), "--synthetic", "--seed", "1",
                   "--jobs", "1", "--out", str(tmp_path / "o")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "2 sets x 2 classes x 2 folds = 8 cycles" in out
    assert (tmp_path / "o" / "stage1_mini.csv").exists() and (tmp_path / "o" / "winner.json").exists()


def test_profile_wraps_train(tmp_path, ingested, fast_config, capsys):
    out = tmp_path / "t"
    rc = cli.main(["profile", "--", "train", "--data", str(ingested / "records.csv"), "--config",
                   str(fast_config), "--jobs", "1", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out / "energy.csv")
    assert len(rows) == 1 and rows[0].duration_s > 0
    assert rows[0].params == 12 * (3 * 8 + 8 + 16 + 8 + 1)
    assert rows[0].model_bytes == 4 * rows[0].params


def test_profile_needs_command():
    assert cli.main(["profile"]) == cli.EXIT_USAGE


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "ocon.cli", "search", "--plan-only"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "648 cycles" in r.stdout
