"""Versioned model files embedding the full prediction pipeline.

A saved model is a JSON document carrying the classifier parameters plus the
fitted standardizer and selection mask, so prediction needs nothing beyond
the model file and a feature table.  Floats are serialized at full precision
(repr), making load(save(m)) prediction-identical to the in-memory model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClassVocabulary, FeatureTable, LabelVector, Standardizer, apply_standardizer
from .ensemble import ProbabilityMatrix
from .errors import DataError
from .fileio import atomic_path
from .forest import ForestConfig, ForestModel, TreeNode, forest_predict, forest_scores
from .knn import KnnConfig, KnnModel, knn_predict
from .selection import SelectionReport, apply_selection
from .svm import BinarySvmModel, SvmConfig, SvmModel, svm_predict, svm_scores

FORMAT_VERSION = 1


@dataclass(frozen=True)
class PipelineModel:
    """A trained classifier plus the preprocessing baked in at training time."""

    vocab: ClassVocabulary
    feature_names_in: tuple[str, ...]
    standardizer: Standardizer | None
    selection: SelectionReport | None
    classifier: SvmModel | ForestModel | KnnModel

    @property
    def model_type(self) -> str:
        if isinstance(self.classifier, SvmModel):
            return "svm"
        if isinstance(self.classifier, ForestModel):
            return "forest"
        return "knn"

    def prepare(self, table: FeatureTable) -> FeatureTable:
        """Validate the input schema and replay standardization/selection."""
        if table.feature_names != self.feature_names_in:
            expected = set(self.feature_names_in)
            got = set(table.feature_names)
            unknown = sorted(got - expected)
            missing = sorted(expected - got)
            if unknown:
                raise DataError(f"unknown feature column(s): {unknown}")
            if missing:
                raise DataError(f"missing feature column(s): {missing}")
            raise DataError("feature columns are ordered differently than at training time")
        if self.standardizer is not None:
            table = apply_standardizer(self.standardizer, table)
        if self.selection is not None:
            table = apply_selection(self.selection, table)
        return table

    def predict(self, table: FeatureTable) -> LabelVector:
        prepared = self.prepare(table)
        if isinstance(self.classifier, SvmModel):
            return svm_predict(self.classifier, prepared)
        if isinstance(self.classifier, ForestModel):
            return forest_predict(self.classifier, prepared)
        return knn_predict(self.classifier, prepared)

    def scores(self, table: FeatureTable) -> ProbabilityMatrix | None:
        """Class probabilities, or None for classifiers without a score notion."""
        prepared = self.prepare(table)
        if isinstance(self.classifier, SvmModel):
            return svm_scores(self.classifier, prepared, self.vocab)
        if isinstance(self.classifier, ForestModel):
            return forest_scores(self.classifier, prepared, self.vocab)
        return None


def _tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"counts": node.counts.tolist()}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(obj: dict) -> TreeNode:
    if "counts" in obj:
        return TreeNode(counts=np.array(obj["counts"], dtype=float))
    return TreeNode(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_tree_from_dict(obj["left"]),
        right=_tree_from_dict(obj["right"]),
    )


def _classifier_to_dict(model) -> tuple[dict, dict]:
    if isinstance(model, SvmModel):
        cfg = model.config
        config = {
            "c": cfg.c,
            "gamma_mode": cfg.gamma_mode,
            "gamma": cfg.gamma,
            "resolved_gamma": model.binaries[0].gamma if model.binaries else None,
            "tolerance": cfg.tolerance,
            "max_passes": cfg.max_passes,
        }
        params = {
            "vocab_size": model.vocab_size,
            "n_features": model.n_features,
            "binaries": [
                {
                    "class_pair": list(b.class_pair),
                    "gamma": b.gamma,
                    "bias": b.bias,
                    "dual_coeffs": b.dual_coeffs.tolist(),
                    "support_vectors": b.support_vectors.tolist(),
                }
                for b in model.binaries
            ],
        }
        return config, params
    if isinstance(model, ForestModel):
        cfg = model.config
        config = {
            "n_trees": cfg.n_trees,
            "max_depth": cfg.max_depth,
            "max_depth_raw": cfg.max_depth_raw,
            "min_samples_split": cfg.min_samples_split,
            "features_per_split": cfg.features_per_split,
            "seed": cfg.seed,
        }
        params = {
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
        return config, params
    if isinstance(model, KnnModel):
        config = {"k_neighbors": model.config.k_neighbors}
        params = {
            "n_classes": model.n_classes,
            "train_values": model.train_values.tolist(),
            "train_labels": model.train_labels.tolist(),
        }
        return config, params
    raise DataError(f"cannot persist classifier of type {type(model).__name__}")


def _classifier_from_dict(model_type: str, config: dict, params: dict):
    if model_type == "svm":
        cfg = SvmConfig(
            c=config["c"],
            gamma_mode=config["gamma_mode"],
            gamma=config["gamma"],
            tolerance=config["tolerance"],
            max_passes=config["max_passes"],
        )
        binaries = tuple(
            BinarySvmModel(
                support_vectors=np.array(b["support_vectors"], dtype=float).reshape(
                    len(b["dual_coeffs"]), params["n_features"]
                ),
                dual_coeffs=np.array(b["dual_coeffs"], dtype=float),
                bias=float(b["bias"]),
                gamma=float(b["gamma"]),
                class_pair=tuple(b["class_pair"]),
            )
            for b in params["binaries"]
        )
        return SvmModel(binaries, params["vocab_size"], params["n_features"], cfg)
    if model_type == "forest":
        fps = config["features_per_split"]
        cfg = ForestConfig(
            n_trees=config["n_trees"],
            max_depth=config["max_depth"],
            min_samples_split=config["min_samples_split"],
            features_per_split=fps if isinstance(fps, str) else int(fps),
            seed=config["seed"],
            max_depth_raw=config.get("max_depth_raw"),
        )
        trees = tuple(_tree_from_dict(t) for t in params["trees"])
        return ForestModel(trees, params["n_classes"], params["n_features"], cfg)
    if model_type == "knn":
        cfg = KnnConfig(k_neighbors=config["k_neighbors"])
        values = np.array(params["train_values"], dtype=float)
        return KnnModel(
            values.reshape(len(params["train_labels"]), -1),
            np.array(params["train_labels"], dtype=np.int64),
            params["n_classes"],
            cfg,
        )
    raise DataError(f"unknown model_type {model_type!r} in model file")


def save_model(model: PipelineModel, path: str | Path) -> None:
    config, params = _classifier_to_dict(model.classifier)
    doc = {
        "format_version": FORMAT_VERSION,
        "model_type": model.model_type,
        "classes": list(model.vocab.names),
        "feature_names_in": list(model.feature_names_in),
        "standardizer": None
        if model.standardizer is None
        else {
            "means": model.standardizer.means.tolist(),
            "std_devs": model.standardizer.std_devs.tolist(),
        },
        "selection": None
        if model.selection is None
        else {
            "f_scores": model.selection.f_scores.tolist(),
            "selected": model.selection.selected.astype(int).tolist(),
            "k": model.selection.k,
        },
        "config": config,
        "params": params,
    }
    with atomic_path(path) as tmp:
        with tmp.open("w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, allow_nan=False)
            fh.write("\n")


def load_model(path: str | Path) -> PipelineModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid model file ({exc})") from None
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(
            f"{path}: model file version {version!r} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    vocab = ClassVocabulary(tuple(doc["classes"]))
    feature_names = tuple(doc["feature_names_in"])
    standardizer = None
    if doc["standardizer"] is not None:
        standardizer = Standardizer(
            np.array(doc["standardizer"]["means"], dtype=float),
            np.array(doc["standardizer"]["std_devs"], dtype=float),
        )
    selection = None
    if doc["selection"] is not None:
        selection = SelectionReport(
            feature_names,
            np.array(doc["selection"]["f_scores"], dtype=float),
            np.array(doc["selection"]["selected"], dtype=bool),
            int(doc["selection"]["k"]),
        )
    classifier = _classifier_from_dict(doc["model_type"], doc["config"], doc["params"])
    return PipelineModel(vocab, feature_names, standardizer, selection, classifier)
