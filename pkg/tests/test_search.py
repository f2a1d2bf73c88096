import csv
import json

import numpy as np
import pytest

from ocon.errors import ConflictingHP, EmptySweep
from ocon.search import (
    GridStage, StageOutcome, TrialResult, enumerate_combinations, inherit, load_stages, mlp_config,
    reference_stages, run_search, run_stage,
)


def blobs(n=40, k=3, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]])[:k]
    return np.vstack([rng.normal(c, 0.08, (n, 2)) for c in centers]), np.repeat(np.arange(k), n)


def test_reference_cycle_counts():
    stages = reference_stages()
    assert [s.name for s in stages] == ["architecture", "dropout", "batch_norm", "l2"]
    assert [s.cycles(12) for s in stages] == [648, 864, 360, 360]
    assert [s.n_sets() for s in stages] == [18, 12, 3, 3]
    assert [s.folds for s in stages] == [3, 6, 10, 10]
    assert [s.epochs for s in stages] == [1000, 3000, 1000, 1000]


def test_smoke_profile():
    s = reference_stages()[1].smoke()
    assert (s.epochs, s.folds) == (50, 2)


def test_single_stage_files_match_bundle(tmp_path):
    from importlib import resources
    folder = resources.files("ocon").joinpath("stages")
    singles = sorted(p.name for p in folder.iterdir() if p.name.startswith("stage"))
    loaded = [load_stages(folder.joinpath(n))[0] for n in singles]
    assert [s.to_dict() for s in loaded] == [s.to_dict() for s in reference_stages()]


def test_enumeration_order():
    s = GridStage("t", swept={"a": [1, 2], "b": ["x", "y", "z"]})
    combos = enumerate_combinations(s)
    assert combos[:3] == [{"a": 1, "b": "x"}, {"a": 1, "b": "y"}, {"a": 1, "b": "z"}]
    assert len(combos) == 6 and combos[-1] == {"a": 2, "b": "z"}
    assert len(enumerate_combinations(reference_stages()[0])) == 18


def test_empty_sweep():
    with pytest.raises(EmptySweep):
        enumerate_combinations(GridStage("t", swept={"lr": []}))


def test_mlp_config_mapping():
    c = mlp_config({"hidden_nodes": 50, "n_hidden_layers": 2, "optimizer": "rmsprop", "lr": 1e-3,
                    "activation": "relu"}, input_dim=3)
    assert c.hidden_layers == (50, 50) and c.optimizer == "rmsprop" and c.input_dim == 3
    with pytest.raises(ValueError):
        mlp_config({"activation": "tanh"}, 3)
    with pytest.raises(ValueError):
        mlp_config({"momentum": 0.9}, 3)


def outcome(best, fixed=None):
    stage = GridStage("prev", swept={k: [v] for k, v in best.items()}, fixed=fixed or {})
    return StageOutcome(stage, [], best, {**(fixed or {}), **best})


def test_inherit():
    prev = outcome({"lr": 1e-4, "hidden_nodes": 100}, fixed={"keep_input": 1.0, "batch_norm": False})
    nxt = GridStage("dropout", swept={"keep_input": [0.8, 0.9]}, fixed={"batch_norm": False})
    got = inherit(prev, nxt)
    assert got.fixed == {"lr": 1e-4, "hidden_nodes": 100, "batch_norm": False}
    assert got.swept == nxt.swept


def test_inherit_declared_fixed_wins():
    prev = outcome({"lr": 1e-4}, fixed={"batch_norm": False})
    got = inherit(prev, GridStage("bn", swept={"l2_lambda": [0.1]}, fixed={"batch_norm": True}))
    assert got.fixed["batch_norm"] is True and got.fixed["lr"] == 1e-4


def test_inherit_conflict_and_override():
    prev = outcome({"lr": 1e-4})
    with pytest.raises(ConflictingHP):
        inherit(prev, GridStage("bn", swept={"lr": [1e-3, 1e-4]}))
    got = inherit(prev, GridStage("bn", swept={"lr": [1e-3, 1e-4]}, overrides=["lr"]))
    assert "lr" not in got.fixed


def test_inherit_empty_winner():
    nxt = GridStage("x", swept={"lr": [1e-3]}, fixed={"a": 1})
    assert inherit(outcome({}), nxt) is nxt


def tiny_stage(**kw):
    base = dict(name="tiny", swept={"lr": [1e-5, 1e-2]}, fixed={"hidden_nodes": 8, "batch_norm": False,
                                                                  "keep_input": 1.0, "keep_hidden": 1.0},
                folds=2, epochs=15)
    base.update(kw)
    return GridStage(**base)


def test_run_stage_shapes_and_winner():
    x, y = blobs()
    out = run_stage(tiny_stage(), x, y, master_seed=0)
    assert len(out.trials) == 2
    for t in out.trials:
        assert t.accuracies.shape == (3, 2) and t.times.shape == (3, 2)
    assert out.best == {"lr": 1e-2}
    assert out.ranked[0].combination == out.best
    assert out.inherited["lr"] == 1e-2 and out.inherited["hidden_nodes"] == 8


def test_run_stage_single_combination():
    x, y = blobs()
    out = run_stage(tiny_stage(swept={"lr": [1e-3]}), x, y, master_seed=0)
    assert out.best == {"lr": 1e-3}


def test_run_stage_deterministic_and_parallel():
    x, y = blobs()
    a = run_stage(tiny_stage(), x, y, 5)
    b = run_stage(tiny_stage(), x, y, 5, jobs=2)
    assert [t.accuracies.tobytes() for t in a.trials] == [t.accuracies.tobytes() for t in b.trials]
    assert [t.index for t in a.ranked] == [t.index for t in b.ranked]


def test_failed_trial_scores_zero():
    x, y = blobs()
    stage = tiny_stage(swept={"batch_size": [0, 8]})  # batch_size 0 is rejected by MLPConfig
    out = run_stage(stage, x, y, 0)
    assert out.trials[0].failed and out.trials[0].mean_accuracy == 0.0
    assert out.best == {"batch_size": 8}


def test_tie_first_and_rescale_invariance():
    def trial(i, acc):
        return TrialResult(i, {"k": i}, np.full((2, 2), acc), np.zeros((2, 2)))

    trials = [trial(0, 0.5), trial(1, 0.9), trial(2, 0.9)]
    stage = GridStage("t", swept={"k": [0, 1, 2]})
    first = max(trials, key=lambda t: t.mean_accuracy)
    assert first.index == 1
    scaled = [trial(t.index, t.mean_accuracy * 0.37) for t in trials]
    assert max(scaled, key=lambda t: t.mean_accuracy).index == 1
    ranked = StageOutcome(stage, trials, {}, {}).ranked
    assert [t.index for t in ranked] == [1, 2, 0]


def test_subset_of_classes_and_csv(tmp_path):
    x, y = blobs()
    out = run_stage(tiny_stage(classes=[2]), x, y, 0)
    assert out.trials[0].accuracies.shape == (1, 2)
    out.write_csv(tmp_path / "s.csv", ["a", "b", "c"])
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["rank", "index", "combination", "mean_acc", "mean_time_s", "acc_c"]
    assert len(rows) == 3


def test_run_search_chain(tmp_path):
    x, y = blobs()
    stages = [tiny_stage(), GridStage("b", swept={"keep_hidden": [0.5, 1.0]}, folds=2, epochs=10)]
    outs = run_search(stages, {"ss3": (x, y)}, 0, out_dir=tmp_path, class_names=["a", "b", "c"])
    assert outs[1].stage.fixed["lr"] == outs[0].best["lr"]
    assert outs[1].stage.fixed["hidden_nodes"] == 8
    assert (tmp_path / "stage1_tiny.csv").exists() and (tmp_path / "stage2_b.csv").exists()


def test_load_stage_forms(tmp_path):
    d = {"name": "x", "swept": {"lr": [0.1]}}
    (tmp_path / "a.json").write_text(json.dumps(d))
    (tmp_path / "b.json").write_text(json.dumps([d, d]))
    (tmp_path / "c.json").write_text(json.dumps({"stages": [d]}))
    assert [len(load_stages(tmp_path / f"{n}.json")) for n in "abc"] == [1, 2, 1]
