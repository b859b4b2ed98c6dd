"""Command line interface: train, adjust, simulate, synth, serve.

A JSON config file may supply any flag (keys use the flag name with
underscores); explicit flags override the file. Exit codes: 0 success,
1 data errors, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .calibration import adjust_system
from .corpus import generate_synthetic_corpus, load_corpus, save_corpus, split_corpus
from .errors import ConfigError, DataError
from .matcher import train_matcher, score_diffs
from .metrics import ScoreSets, min_dcf
from .model_io import ModelEntry, ModelFile, load_model, save_model
from .simulation import (
    SimulationConfig,
    SimulationReport,
    emit_report,
    extract_features_by_user,
    simulate_entry,
    _training_dicts,
)

DEFAULTS = {
    "train": {
        "corpus": None,
        "split_seed": 0,
        "ratio": "0.5",
        "coefficients": 30,
        "out": None,
    },
    "adjust": {"corpus": None, "model": None, "refs": 5, "fusion": "max", "split_seed": None},
    "simulate": {
        "corpus": None,
        "model": None,
        "enroll": "intelligent",
        "threshold": "it",
        "random_forgeries": False,
        "report": None,
        "split_seed": None,
    },
    "synth": {"users": 25, "genuine": 25, "forgeries": 25, "seed": 0, "out": None},
    "serve": {
        "model": None,
        "templates": None,
        "port": None,
        "host": "127.0.0.1",
        "ratio": None,
        "threshold_mode": "it",
        "relax_ranges": False,
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigverify")
    parser.add_argument("--config", help="JSON file supplying any flag; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    s = argparse.SUPPRESS

    p = sub.add_parser("train", help="train matcher(s) on the DB1 portion of a corpus")
    p.add_argument("--corpus", default=s)
    p.add_argument("--split-seed", type=int, default=s, dest="split_seed")
    p.add_argument("--ratio", default=s, help="sigma ratio threshold(s), comma separated")
    p.add_argument("--coefficients", type=int, default=s, help="DCT terms per channel")
    p.add_argument("--out", default=s)

    p = sub.add_parser("adjust", help="calibrate thresholds on the DB2 portion")
    p.add_argument("--corpus", default=s)
    p.add_argument("--model", default=s)
    p.add_argument("--refs", type=int, choices=(3, 5), default=s)
    p.add_argument("--fusion", choices=("max", "mean"), default=s)
    p.add_argument("--split-seed", type=int, default=s, dest="split_seed")

    p = sub.add_parser("simulate", help="run the operational simulation on DB3")
    p.add_argument("--corpus", default=s)
    p.add_argument("--model", default=s)
    p.add_argument("--enroll", choices=("intelligent", "normal", "both"), default=s)
    p.add_argument("--threshold", choices=("ct", "it", "both"), default=s)
    p.add_argument("--random-forgeries", action="store_true", default=s,
                   dest="random_forgeries")
    p.add_argument("--report", default=s, help="output directory")
    p.add_argument("--split-seed", type=int, default=s, dest="split_seed")

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p.add_argument("--users", type=int, default=s)
    p.add_argument("--genuine", type=int, default=s)
    p.add_argument("--forgeries", type=int, default=s)
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--out", default=s)

    p = sub.add_parser("serve", help="run the enrollment/verification HTTP service")
    p.add_argument("--model", default=s)
    p.add_argument("--templates", default=s)
    p.add_argument("--port", type=int, default=s)
    p.add_argument("--host", default=s)
    p.add_argument("--ratio", type=float, default=s)
    p.add_argument("--threshold-mode", choices=("ct", "it"), default=s, dest="threshold_mode")
    p.add_argument("--relax-ranges", action="store_true", default=s, dest="relax_ranges")
    return parser


def merge_options(command: str, namespace: argparse.Namespace) -> dict:
    options = dict(DEFAULTS[command])
    config_path = getattr(namespace, "config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_options = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        if not isinstance(file_options, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in file_options.items():
            if key in options:
                options[key] = value
    for key, value in vars(namespace).items():
        if key in options:
            options[key] = value
    return options


def require(options: dict, *keys: str) -> None:
    for key in keys:
        if options[key] is None:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")


def cmd_train(options: dict) -> None:
    require(options, "corpus", "out")
    try:
        ratios = [float(r) for r in str(options["ratio"]).split(",") if r.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --ratio value: {options['ratio']}") from exc
    if not ratios:
        raise ConfigError("--ratio needs at least one value")
    corpus = load_corpus(options["corpus"])
    split, shuffled = split_corpus(corpus, options["split_seed"])
    k = options["coefficients"]
    db1 = extract_features_by_user(shuffled, split.db1_users, k)
    genuine, forgery = _training_dicts(db1)
    entries = []
    for ratio in ratios:
        matcher, client, impostor = train_matcher(genuine, forgery, ratio)
        t0, _ = min_dcf(
            ScoreSets(score_diffs(matcher, client), score_diffs(matcher, impostor))
        )
        entries.append(ModelEntry(matcher=matcher, t0=t0))
        print(f"ratio {ratio}: {matcher.selected_count} features selected, T0 = {t0:.4f}")
    save_model(
        ModelFile(entries=entries, coefficient_count=k, split_seed=options["split_seed"]),
        options["out"],
    )
    print(f"model written to {options['out']}")


def cmd_adjust(options: dict) -> None:
    require(options, "corpus", "model")
    model = load_model(options["model"])
    seed = options["split_seed"] if options["split_seed"] is not None else model.split_seed
    if seed is None:
        raise ConfigError("no --split-seed given and the model records none")
    corpus = load_corpus(options["corpus"])
    split, shuffled = split_corpus(corpus, seed)
    db2 = extract_features_by_user(shuffled, split.db2_users, model.coefficient_count)
    for entry in model.entries:
        if entry.t0 is None:
            raise DataError("model entry lacks T0; re-run train")
        params = adjust_system(
            entry.matcher,
            None,
            None,
            db2,
            options["refs"],
            options["fusion"],
            t0=entry.t0,
        )
        entry.calibration = params
        print(
            f"ratio {entry.matcher.ratio_threshold}: TE = {params.te:.4f}, "
            f"CT = {params.ct:.4f}, alpha1 = {params.alpha1}, alpha2 = {params.alpha2}"
        )
    save_model(model, options["model"])
    print(f"calibration written into {options['model']}")


def cmd_simulate(options: dict) -> None:
    require(options, "corpus", "model", "report")
    model = load_model(options["model"])
    seed = options["split_seed"] if options["split_seed"] is not None else model.split_seed
    if seed is None:
        raise ConfigError("no --split-seed given and the model records none")
    calibrated = [e for e in model.entries if e.calibration is not None]
    if not calibrated:
        raise DataError("model has no calibrated entries; run adjust first")
    corpus = load_corpus(options["corpus"])
    split, shuffled = split_corpus(corpus, seed)
    db3 = extract_features_by_user(shuffled, split.db3_users, model.coefficient_count)
    enroll_modes = (
        ("intelligent", "normal") if options["enroll"] == "both" else (options["enroll"],)
    )
    threshold_modes = (
        ("ct", "it") if options["threshold"] == "both" else (options["threshold"],)
    )
    rows = []
    refs_counts = {e.calibration.refs_count for e in calibrated}
    fusions = {e.calibration.fusion for e in calibrated}
    for entry in calibrated:
        config = SimulationConfig(
            ratio_thresholds=(entry.matcher.ratio_threshold,),
            refs_count=entry.calibration.refs_count,
            fusion=entry.calibration.fusion,
            enroll_modes=enroll_modes,
            threshold_modes=threshold_modes,
            random_forgeries=bool(options["random_forgeries"]),
            split_seed=seed,
            coefficient_count=model.coefficient_count,
        )
        rows.extend(simulate_entry(entry.matcher, entry.calibration, db3, config))
    metadata = {
        "split_seed": seed,
        "db1_size": len(split.db1_users),
        "db2_size": len(split.db2_users),
        "db3_size": len(split.db3_users),
        "refs_counts": sorted(refs_counts),
        "fusions": sorted(fusions),
        "coefficient_count": model.coefficient_count,
    }
    if corpus.metadata:
        metadata["corpus"] = corpus.metadata
    report = SimulationReport(rows=rows, metadata=metadata)
    csv_path, json_path = emit_report(report, options["report"])
    print(f"report written to {csv_path} and {json_path}")


def cmd_synth(options: dict) -> None:
    require(options, "out")
    corpus = generate_synthetic_corpus(
        options["users"], options["genuine"], options["forgeries"], options["seed"]
    )
    save_corpus(corpus, options["out"])
    total = sum(len(u.genuine) + len(u.forgeries) for u in corpus.users.values())
    print(f"{total} signatures for {options['users']} users written to {options['out']}")


def cmd_serve(options: dict) -> None:
    from .service import run_server

    model = options["model"]
    templates = options["templates"] or os.environ.get("SIGVERIFY_TEMPLATES")
    port = options["port"] or int(os.environ.get("SIGVERIFY_PORT", "8000"))
    if model is None:
        raise ConfigError("missing required option --model")
    if templates is None:
        raise ConfigError("missing --templates (or SIGVERIFY_TEMPLATES)")
    run_server(
        model,
        templates,
        host=options["host"],
        port=port,
        threshold_mode=options["threshold_mode"],
        ratio=options["ratio"],
        relax_ranges=bool(options["relax_ranges"]),
    )


COMMANDS = {
    "train": cmd_train,
    "adjust": cmd_adjust,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    try:
        options = merge_options(namespace.command, namespace)
        COMMANDS[namespace.command](options)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
