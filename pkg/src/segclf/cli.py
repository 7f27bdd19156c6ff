"""Command-line pipeline driver.

Subcommands: select, train, predict, ensemble, pseudo-label, evaluate,
gen-synthetic.  Commands read a declarative config file (see segclf.config)
with --seed / --out overrides, write their outputs atomically, and exit 0 on
success, 2 on config errors, 3 on data errors, and 4 on numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager
from pathlib import Path

from . import dataset, ensemble, metrics, persistence, plots, selection, synthetic
from .config import GeneratorConfig, RunConfig, load_generator_config, load_run_config
from .ensemble import PseudoLabelConfig
from .errors import ConfigError, PipelineError
from .fileio import atomic_path, atomic_write_text
from .forest import forest_train
from .knn import knn_train
from .svm import svm_train


@contextmanager
def _stage(name: str):
    """Prefix pipeline errors with the failing stage name."""
    try:
        yield
    except PipelineError as exc:
        raise type(exc)(f"{name}: {exc}") from None


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    return cfg.with_overrides(
        seed=getattr(args, "seed", None),
        output_dir=Path(args.out) if getattr(args, "out", None) else None,
    )


def _load_training_data(cfg: RunConfig):
    with _stage("load"):
        features = dataset.load_feature_table(cfg.data_path("train_features"))
        labels = dataset.load_labels(cfg.data_path("train_labels"), cfg.vocab)
        return dataset.align(features, labels)


def _fit_selection(cfg: RunConfig, features, labels):
    selection.warn_absent_classes(labels, cfg.vocab.size)
    if cfg.selection.mode == "top_k":
        return selection.select_top_k(features, labels, cfg.selection.k)
    if cfg.selection.mode == "percentile":
        return selection.select_percentile(features, labels, cfg.selection.percentile)
    raise ConfigError("selection mode is 'none'; nothing to select")


def cmd_select(args) -> int:
    cfg = _load_config(args)
    features, labels = _load_training_data(cfg)
    with _stage("select"):
        report = _fit_selection(cfg, features, labels)
    scores_path = cfg.output_dir / "f_scores.csv"
    selection.export_scores(report, scores_path)
    figure_path = cfg.output_dir / "f_scores.png"
    plots.render_score_profile(report, figure_path)
    print(f"scored {len(report.feature_names)} features, selected {report.k}")
    print(f"wrote {scores_path}")
    print(f"wrote {figure_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if cfg.classifier_kind == "ensemble":
        raise ConfigError("train needs an [svm], [forest], or [knn] section, not [ensemble]")
    features, labels = _load_training_data(cfg)
    standardizer = None
    if cfg.standardize and cfg.classifier_kind in ("svm", "knn"):
        with _stage("standardize"):
            standardizer = dataset.fit_standardizer(features)
            features = dataset.apply_standardizer(standardizer, features)
    report = None
    if cfg.selection.mode != "none":
        with _stage("select"):
            report = _fit_selection(cfg, features, labels)
            features = selection.apply_selection(report, features)
    with _stage("train"):
        if cfg.classifier_kind == "svm":
            classifier = svm_train(features, labels, cfg.svm, n_classes=cfg.vocab.size)
        elif cfg.classifier_kind == "forest":
            classifier = forest_train(features, labels, cfg.forest, n_classes=cfg.vocab.size)
        else:
            classifier = knn_train(features, labels, cfg.knn, n_classes=cfg.vocab.size)
    model = persistence.PipelineModel(
        vocab=cfg.vocab,
        feature_names_in=report.feature_names if report is not None else features.feature_names,
        standardizer=standardizer,
        selection=report,
        classifier=classifier,
    )
    model_path = cfg.output_dir / "model.json"
    persistence.save_model(model, model_path)
    print(f"trained {model.model_type} on {labels.n_segments} segments")
    print(f"wrote {model_path}")
    return 0


def cmd_predict(args) -> int:
    if args.out:
        out_dir = Path(args.out)
    elif args.config:
        out_dir = load_run_config(args.config).output_dir
    else:
        raise ConfigError("predict needs --out (or --config to supply output_dir)")
    model = persistence.load_model(args.model)
    table = dataset.load_feature_table(args.features)
    predictions = model.predict(table)
    predictions_path = out_dir / "predictions.csv"
    dataset.write_labels(predictions, model.vocab, predictions_path)
    print(f"wrote {predictions_path}")
    scores = model.scores(table)
    if scores is not None:
        probabilities_path = out_dir / "probabilities.csv"
        ensemble.write_probabilities(scores, probabilities_path)
        print(f"wrote {probabilities_path}")
    return 0


def cmd_ensemble(args) -> int:
    cfg = _load_config(args)
    if cfg.classifier_kind != "ensemble":
        raise ConfigError("ensemble needs an [ensemble] section in the config")
    with _stage("load"):
        matrices = [
            ensemble.load_probabilities(path, cfg.vocab) for path in cfg.probability_files
        ]
    with _stage("vote"):
        combined = ensemble.soft_vote(matrices, cfg.ensemble)
        predictions = ensemble.predict_from_probs(combined)
    predictions_path = cfg.output_dir / "predictions.csv"
    dataset.write_labels(predictions, cfg.vocab, predictions_path)
    probabilities_path = cfg.output_dir / "probabilities.csv"
    ensemble.write_probabilities(combined, probabilities_path)
    print(f"combined {len(matrices)} probability files over {combined.n_segments} segments")
    print(f"wrote {predictions_path}")
    print(f"wrote {probabilities_path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    with _stage("load"):
        predicted = dataset.load_labels(args.predictions, cfg.vocab)
        reference = dataset.load_labels(args.labels, cfg.vocab)
    with _stage("score"):
        cm = metrics.confusion(reference, predicted, cfg.vocab)
        report = metrics.score(cm)
    out = cfg.output_dir
    metrics.write_score_table(report, out / "scores.csv")
    metrics.write_confusion(cm, out / "confusion.csv")
    text = metrics.render_text_report(cm, report)
    atomic_write_text(out / "report.txt", text)
    plots.render_confusion_heatmap(cm, out / "confusion.png")
    print(text, end="")
    for name in ("scores.csv", "confusion.csv", "report.txt", "confusion.png"):
        print(f"wrote {out / name}")
    return 0


def cmd_pseudo_label(args) -> int:
    cfg = _load_config(args)
    pseudo = cfg.pseudo if cfg.pseudo is not None else PseudoLabelConfig()
    scores_path = Path(args.scores) if args.scores else cfg.scores_file
    if scores_path is None:
        raise ConfigError("pseudo-label needs --scores (or [pseudo_label] scores in the config)")
    train_x, train_y = _load_training_data(cfg)
    with _stage("load"):
        unlabeled_x = dataset.load_feature_table(cfg.data_path("unlabeled_features"))
        scores = ensemble.load_probabilities(scores_path, cfg.vocab)
    with _stage("pseudo-label"):
        augmented_x, augmented_y, report = ensemble.pseudo_label_round(
            train_x, train_y, unlabeled_x, scores, pseudo
        )
    existing = dataset.read_label_provenance(cfg.data_path("train_labels")) or {}
    provenance = [existing.get(sid, "train") for sid in train_y.segment_ids]
    provenance += [f"pseudo_round_{args.round}"] * report.n_added
    out = cfg.output_dir
    dataset.write_feature_table(augmented_x, out / "augmented_features.csv")
    dataset.write_labels(augmented_y, cfg.vocab, out / "augmented_labels.csv", provenance)
    added = set(report.added_segment_ids)
    remaining_rows = [i for i, sid in enumerate(unlabeled_x.segment_ids) if sid not in added]
    dataset.write_feature_table(
        unlabeled_x.take_rows(remaining_rows), out / "remaining_unlabeled_features.csv"
    )
    with atomic_path(out / "pseudo_report.csv") as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["round", "segments_added", "class", "count"])
            for name, count in zip(cfg.vocab.names, report.per_class_counts):
                writer.writerow([args.round, report.n_added, name, count])
    print(
        f"round {args.round}: added {report.n_added} of {unlabeled_x.n_segments} "
        f"unlabeled segments at threshold {pseudo.confidence_threshold}"
    )
    for name in (
        "augmented_features.csv",
        "augmented_labels.csv",
        "remaining_unlabeled_features.csv",
        "pseudo_report.csv",
    ):
        print(f"wrote {out / name}")
    return 0


def cmd_gen_synthetic(args) -> int:
    cfg: GeneratorConfig = load_generator_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    out = Path(args.out) if args.out else cfg.output_dir
    spec = cfg.spec
    if seed != spec.seed:
        from dataclasses import replace

        spec = replace(spec, seed=seed)
    data = synthetic.generate_blobs(spec, cfg.vocab)
    for partition, (features, labels) in data.partitions.items():
        features_path = out / f"{partition}_features.csv"
        labels_path = out / f"{partition}_labels.csv"
        dataset.write_feature_table(features, features_path)
        dataset.write_labels(labels, cfg.vocab, labels_path)
        print(f"wrote {features_path} ({features.n_segments} x {features.n_features})")
        print(f"wrote {labels_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segclf",
        description="Feature-selection driven segment classification pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, needs_config: bool = True):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("--config", required=True, help="run configuration file")
        else:
            p.add_argument("--config", help="run configuration file (optional)")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--out", help="override [run] output_dir")
        p.set_defaults(func=func)
        return p

    add("select", cmd_select, "score features and export the selection report")
    add("train", cmd_train, "fit standardizer/selection/classifier and save the model")

    predict = add("predict", cmd_predict, "predict labels with a saved model", needs_config=False)
    predict.add_argument("--model", required=True, help="model file from train")
    predict.add_argument("--features", required=True, help="feature file to predict on")

    add("ensemble", cmd_ensemble, "soft-vote probability files into predictions")

    pseudo = add("pseudo-label", cmd_pseudo_label, "append confident unlabeled segments")
    pseudo.add_argument("--scores", help="probability file covering the unlabeled segments")
    pseudo.add_argument("--round", type=int, default=1, help="round number for provenance")

    evaluate = add("evaluate", cmd_evaluate, "score predictions against reference labels")
    evaluate.add_argument("--predictions", required=True, help="predictions label file")
    evaluate.add_argument("--labels", required=True, help="reference label file")

    add("gen-synthetic", cmd_gen_synthetic, "generate a Gaussian-blob fixture dataset")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
