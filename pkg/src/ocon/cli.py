"""Command line entry point: ``ocon {ingest,train,search,eval,infer,profile}``.

Every subcommand that takes ``--out`` writes ``manifest.json`` there with the
argv, resolved configuration, seed, input checksums and library versions.

Exit codes: 0 success, 2 usage/configuration error, 3 data error,
4 training failure.

Train config file (JSON, every key optional; flags win over file values)::

    {"variant": "tt12", "task": "phoneme", "seed": 0, "jobs": 4, "head": "argmax",
     "mlp": {<MLPConfig fields>},
     "stop": {<EarlyStopSpec fields, all classes>},
     "stops": {"<class name>": {<EarlyStopSpec fields>}},
     "split": {"train_frac": 0.7, "dev_frac": 0.15, "test_frac": 0.15}}
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, plotting, profiling, search
from .dataset import ColumnMap, SplitSpec, class_stats, write_records
from .ensemble import OconEnsemble, infer
from .errors import ConflictingHP, ContainerError, DataError, EmptySweep, TrainingFailure
from .experiment import (checkpoint_dir, checkpoint_scaling, ensemble_size, evaluate_checkpoint,
                         load_records, scaled_matrix, train_protocol)
from .features import FeatureMatrix, VariantKind, save_container
from .metrics import write_accuracy_table, write_rates_table
from .neural import MLPConfig
from .trainer import EarlyStopSpec, default_stops, write_reports

log = logging.getLogger("ocon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: str, argv, seed, config: dict, inputs=()) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).is_file()},
        "versions": {"ocon": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))


def resolve_seed(flag, config: dict) -> int:
    if flag is not None:
        return int(flag)
    if "seed" in config:
        return int(config["seed"])
    return int(os.environ.get("OCON_SEED", 0))


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: {exc}") from exc


def _records(args):
    column_map = ColumnMap.from_json(args.column_map) if getattr(args, "column_map", None) else None
    if args.data is None and args.synthetic is None:
        raise UsageError("give --data PATH or --synthetic [SEED]")
    return load_records(args.data, column_map, synthetic_seed=args.synthetic)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_data_args(p, column_map=True):
    p.add_argument("--data", help="formant table (raw HGCW layout or the CSV written by ingest)")
    p.add_argument("--synthetic", nargs="?", type=int, const=0, metavar="SEED",
                   help="use the built-in synthetic formant table instead of --data")
    if column_map:
        p.add_argument("--column-map", help="JSON column map for non-standard tables")


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, argv):
    records, n_dropped = _records(args)
    out = _out_dir(args.out)
    write_records(records, out / "records.csv")
    stats = class_stats(records)
    stats.write_csv(out / "class_stats.csv")
    for kind in VariantKind:
        matrix = scaled_matrix(records, kind)
        save_container(matrix, out / f"features_{kind.value}.ocfs")
    plotting.plot_pmd(scaled_matrix(records, VariantKind.TT12_F0), out / "pmd.svg")
    write_manifest(out, "ingest", argv, args.synthetic, {"dropped_nulls": n_dropped},
                   [args.data, getattr(args, "column_map", None)])
    total = stats.totals()
    print(f"records={len(records)} dropped_nulls={n_dropped} "
          f"total={total[0]} boys={total[1]} girls={total[2]} men={total[3]} women={total[4]}")
    return {}


def _train_settings(args):
    cfg = _read_config(args.config)
    variant = args.variant or cfg.get("variant", "ss3")
    task = args.task or cfg.get("task", "phoneme")
    if task not in ("phoneme", "speaker"):
        raise UsageError(f"unknown task {task!r}")
    try:
        variant = VariantKind(variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seed = resolve_seed(args.seed, cfg)
    jobs = args.jobs or int(cfg.get("jobs", os.cpu_count() or 1))
    head = args.head or cfg.get("head", "argmax")
    try:
        mlp = MLPConfig.from_dict({**cfg.get("mlp", {}), "input_dim": variant.dim})
        names = FeatureMatrix.class_names(task)
        stops = default_stops(task, variant, names)
        if "stop" in cfg:
            stops = [EarlyStopSpec.from_dict(cfg["stop"])] * len(names)
        for name, d in cfg.get("stops", {}).items():
            stops[names.index(name)] = EarlyStopSpec.from_dict(d)
        split = SplitSpec(**cfg["split"]) if "split" in cfg else SplitSpec()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    resolved = {"variant": variant.value, "task": task, "seed": seed, "jobs": jobs, "head": head,
                "mlp": mlp.to_dict(), "stops": [s.__dict__ for s in stops], "split": split.__dict__}
    return variant, task, seed, jobs, head, mlp, stops, split, resolved


def cmd_train(args, argv):
    variant, task, seed, jobs, head, mlp, stops, split, resolved = _train_settings(args)
    records, _ = _records(args)
    out = _out_dir(args.out)
    result = train_protocol(records, variant, task, seed, config=mlp, stops=stops, jobs=jobs,
                            split_spec=split, head=head)
    result.ensemble.save(out / "checkpoint")
    write_reports(result.reports, out / "train_reports.json")
    curves = _out_dir(out / "curves")
    for r in result.reports:
        r.write_curve(curves / f"class_{r.class_index:02d}_{r.class_name}.csv")
    plotting.plot_training_curves(result.reports, out / "training_curves.svg")
    write_manifest(out, "train", argv, seed, resolved, [args.data, args.config])
    for r in result.reports:
        print(f"{r.class_name}: {r.stop_reason} epochs={r.epochs_run} batch_sets={r.batch_sets} "
              f"test_acc={r.test_accuracy:.4f}")
    print(f"mean_class_accuracy={result.mean_class_accuracy:.4f} ocon_accuracy={result.ocon_accuracy:.4f}")
    params, muladds = ensemble_size(result.ensemble)
    if result.failed:
        raise TrainingFailure(f"classes failed: {', '.join(result.failed)}")
    return {"params": params, "muladds": muladds}


def cmd_search(args, argv):
    try:
        stages = search.load_stages(args.stage) if args.stage else search.reference_stages()
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"stage spec: {exc}") from exc
    seed = resolve_seed(args.seed, {})
    if args.smoke:
        stages = [s.smoke() for s in stages]
    for i, s in enumerate(stages, start=1):
        n_classes = len(FeatureMatrix.class_names(s.task))
        print(f"stage {i} {s.name}: {s.n_sets()} sets x {s.n_classes(n_classes)} classes x "
              f"{s.folds} folds = {s.cycles(n_classes)} cycles ({s.epochs} epochs)")
    if args.plan_only:
        return {}
    records, _ = _records(args)
    out = _out_dir(args.out)
    cache = {}

    def matrices(variant, task):
        if variant not in cache:
            cache[variant] = scaled_matrix(records, variant)
        m = cache[variant]
        return m.values, m.labels(task)

    outcomes = search.run_search(stages, matrices, seed, jobs=args.jobs or os.cpu_count() or 1,
                                 smoke=False, out_dir=out,
                                 class_names=FeatureMatrix.class_names(stages[0].task))
    for i, o in enumerate(outcomes, start=1):
        plotting.plot_stage(o, out / f"stage{i}_{o.stage.name}.svg")
        print(f"stage {i} {o.stage.name} winner: {json.dumps(o.best)} "
              f"mean_acc={o.ranked[0].mean_accuracy:.4f}")
    final = outcomes[-1].inherited if outcomes else {}
    (out / "winner.json").write_text(json.dumps(final, indent=2, sort_keys=True))
    write_manifest(out, "search", argv, seed, {"stages": [s.to_dict() for s in stages]},
                   [args.data, args.stage])
    return {}


def cmd_eval(args, argv):
    ensemble = OconEnsemble.load(checkpoint_dir(args.checkpoint))
    records, _ = _records(args)
    out = _out_dir(args.out)
    evals, acc, probs, labels = evaluate_checkpoint(ensemble, records, rows=args.rows)
    write_accuracy_table(evals, out / "accuracy_table.csv")
    write_rates_table(evals, out / "rates_table.csv")
    plotting.plot_roc(evals, out / "roc.svg")
    plotting.plot_det(evals, out / "det.svg")
    avg = float(np.mean([e.scores.accuracy for e in evals]))
    summary = {"ocon_accuracy": acc, "mean_class_accuracy": avg, "rows": args.rows,
               "n_records": len(records), "auc": {e.name: e.auc for e in evals}}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    write_manifest(out, "eval", argv, ensemble.master_seed, {"rows": args.rows},
                   [args.data, *sorted(Path(checkpoint_dir(args.checkpoint)).glob("*"))])
    for e in evals:
        print(f"{e.name}: acc={e.scores.accuracy:.4f} f1={e.scores.f1:.4f} auc={e.auc:.4f}")
    print(f"mean_class_accuracy={avg:.4f} ocon_accuracy={acc:.4f}")
    return {}


def _read_feature_rows(path, dim):
    rows = []
    with open(path, newline="") as fh:
        for i, cells in enumerate(csv.reader(fh)):
            if not cells or not "".join(cells).strip():
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if i == 0:
                    continue  # header
                raise DataError(f"row {i}: non-numeric feature value") from None
            if len(values) != dim:
                raise DataError(f"row {i}: {len(values)} values, expected {dim}")
            rows.append(values)
    return np.asarray(rows, dtype=np.float64).reshape(-1, dim)


def cmd_infer(args, argv):
    ensemble = OconEnsemble.load(checkpoint_dir(args.checkpoint))
    variant, scaling = checkpoint_scaling(ensemble)
    rows = _read_feature_rows(args.features, variant.dim)
    if not args.scaled:
        rows = scaling.apply(rows)
    probs, decided = infer(ensemble, rows, head=args.head)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["row", "label_id", "label", *(f"p_{n}" for n in ensemble.class_names)])
    for i, (p, d) in enumerate(zip(probs, decided)):
        w.writerow([i, int(d), ensemble.class_names[int(d)], *(f"{v:.6f}" for v in p)])
    return {}


def cmd_profile(args, argv):
    if not args.command:
        raise UsageError("profile needs a subcommand to wrap, e.g. `ocon profile -- train ...`")
    wrapped = [a for a in args.command if a != "--"] if args.command[0] == "--" else list(args.command)
    if wrapped and wrapped[0] == "profile":
        raise UsageError("profile cannot wrap itself")
    inner = build_parser().parse_args(wrapped)
    model = profiling.EnergyModel.from_env()
    info, profile = profiling.measure(lambda: _dispatch(inner, wrapped), model)
    info = info or {}
    profile = profiling.profile_for_duration(profile.duration_s, model, info.get("params", 0),
                                             info.get("muladds", 0), profile.timestamp)
    target = Path(args.energy_out) if args.energy_out else (
        Path(inner.out) / "energy.csv" if getattr(inner, "out", None) else Path("energy.csv"))
    target.parent.mkdir(parents=True, exist_ok=True)
    profiling.emit_csv(profile, target, append=args.append)
    print(f"duration_s={profile.duration_s:.3f} total_kwh={profile.total_kwh:.6g} "
          f"emissions_kg={profile.emissions_kg:.6g} -> {target}")
    return info


# --------------------------------------------------------------------------
# parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocon", description="One-class-per-network formant classifiers")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("ingest", help="read, filter and summarise a formant table")
    _add_data_args(s)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="train an ensemble")
    _add_data_args(s)
    s.add_argument("--variant", choices=[k.value for k in VariantKind])
    s.add_argument("--task", choices=["phoneme", "speaker"])
    s.add_argument("--config", help="JSON config file")
    s.add_argument("--seed", type=int, help="master seed (default: config, then $OCON_SEED, then 0)")
    s.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    s.add_argument("--head", choices=["argmax", "maxnet"])
    s.add_argument("--out", required=True)

    s = sub.add_parser("search", help="staged grid search")
    _add_data_args(s)
    s.add_argument("--stage", help="stage spec JSON (default: the bundled four-stage search)")
    s.add_argument("--smoke", action="store_true", help=f"{search.SMOKE_EPOCHS} epochs, {search.SMOKE_FOLDS} folds")
    s.add_argument("--plan-only", action="store_true", help="print planned cycles and exit")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--out", default="search_out")

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_data_args(s)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--rows", choices=["balanced", "all"], default="balanced",
                   help="per-class rows: the balanced encoding (default) or every record")
    s.add_argument("--out", required=True)

    s = sub.add_parser("infer", help="classify feature rows")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--features", required=True, help="CSV of unscaled feature rows in variant column order")
    s.add_argument("--scaled", action="store_true", help="rows are already min-max scaled")
    s.add_argument("--head", choices=["argmax", "maxnet"])

    s = sub.add_parser("profile", help="time a subcommand and estimate its energy use")
    s.add_argument("--energy-out", help="CSV path (default: <wrapped --out>/energy.csv)")
    s.add_argument("--append", action="store_true")
    s.add_argument("command", nargs=argparse.REMAINDER)
    return p


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "search": cmd_search, "eval": cmd_eval,
            "infer": cmd_infer, "profile": cmd_profile}


def _dispatch(args, argv):
    return COMMANDS[args.subcommand](args, argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args, argv)
    except (UsageError, ConflictingHP, EmptySweep) as exc:
        print(f"ocon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ContainerError, FileNotFoundError) as exc:
        print(f"ocon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingFailure as exc:
        print(f"ocon: training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
