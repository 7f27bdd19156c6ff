"""Declarative run configuration.

Runs are described by an INI-style file whose keys mirror the library's
config dataclasses one-to-one.  Example:

    [run]
    task = arousal
    seed = 42
    output_dir = out/
    standardize = true

    [data]
    train_features = data/train_features.csv
    train_labels = data/train_labels.csv
    test_features = data/test_features.csv
    test_labels = data/test_labels.csv

    [selection]
    mode = top_k
    k = 20

    [svm]
    c = 0.0538
    gamma = automatic

Exactly one classifier section ([svm], [forest], [knn]) or one [ensemble]
section must be present.  Every referenced path must exist when the config
is validated.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .dataset import ClassVocabulary, vocabulary_for_task
from .ensemble import EnsembleConfig, PseudoLabelConfig
from .errors import ConfigError, ValidationError
from .forest import ForestConfig
from .knn import KnnConfig
from .svm import SvmConfig
from .synthetic import SyntheticSpec

_RUN_KEYS = {"task", "classes", "seed", "output_dir", "standardize"}
_DATA_KEYS = {
    "train_features",
    "train_labels",
    "devel_features",
    "devel_labels",
    "test_features",
    "test_labels",
    "unlabeled_features",
    "features",
    "partitions",
}
_SECTION_KEYS = {
    "run": _RUN_KEYS,
    "data": _DATA_KEYS,
    "selection": {"mode", "k", "percentile"},
    "svm": {"c", "gamma", "tolerance", "max_passes"},
    "forest": {"n_trees", "max_depth", "min_samples_split", "features_per_split"},
    "knn": {"k_neighbors"},
    "ensemble": {"probability_files", "weights"},
    "pseudo_label": {"confidence_threshold", "max_rounds", "scores"},
    "synthetic": {
        "n_train",
        "n_test",
        "n_unlabeled",
        "n_features",
        "n_informative",
        "separation",
    },
}
_CLASSIFIER_SECTIONS = ("svm", "forest", "knn", "ensemble")


@dataclass(frozen=True)
class SelectionSpec:
    mode: str = "none"  # none | top_k | percentile
    k: int | None = None
    percentile: float | None = None


@dataclass(frozen=True)
class RunConfig:
    task: str
    vocab: ClassVocabulary
    seed: int
    output_dir: Path
    standardize: bool
    data: dict[str, Path]
    selection: SelectionSpec
    classifier_kind: str  # svm | forest | knn | ensemble
    svm: SvmConfig | None
    forest: ForestConfig | None
    knn: KnnConfig | None
    ensemble: EnsembleConfig | None
    probability_files: tuple[Path, ...]
    pseudo: PseudoLabelConfig | None
    scores_file: Path | None
    synthetic: SyntheticSpec | None

    def data_path(self, key: str) -> Path:
        try:
            return self.data[key]
        except KeyError:
            raise ConfigError(f"config is missing [data] {key}") from None

    def with_overrides(self, seed: int | None = None, output_dir: Path | None = None) -> "RunConfig":
        cfg = self
        if seed is not None:
            forest = None if cfg.forest is None else replace(cfg.forest, seed=seed)
            synthetic = None if cfg.synthetic is None else replace(cfg.synthetic, seed=seed)
            cfg = replace(cfg, seed=seed, forest=forest, synthetic=synthetic)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        return cfg


def _read_ini(path: str | Path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(
                f"{path}: unknown key(s) {sorted(unknown)} in section [{section}]"
            )
    return parser


def _get_int(section, key: str, default: int) -> int:
    try:
        return section.getint(key, default)
    except ValueError:
        raise ConfigError(f"key {key} must be an integer, got {section.get(key)!r}") from None


def _get_float(section, key: str, default: float) -> float:
    try:
        return section.getfloat(key, default)
    except ValueError:
        raise ConfigError(f"key {key} must be a number, got {section.get(key)!r}") from None


def _get_bool(section, key: str, default: bool) -> bool:
    try:
        return section.getboolean(key, default)
    except ValueError:
        raise ConfigError(f"key {key} must be a boolean, got {section.get(key)!r}") from None


def _parse_vocab(section) -> tuple[str, ClassVocabulary]:
    task = section.get("task")
    if task is None:
        raise ConfigError("config is missing [run] task")
    try:
        vocab = vocabulary_for_task(task)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    classes_raw = section.get("classes")
    if classes_raw:
        names = tuple(name.strip() for name in classes_raw.split(",") if name.strip())
        try:
            custom = ClassVocabulary(names)
        except ValidationError as exc:
            raise ConfigError(f"invalid classes list: {exc}") from None
        if custom.size != vocab.size:
            raise ConfigError(
                f"task {task!r} needs {vocab.size} classes, [run] classes lists {custom.size}"
            )
        vocab = custom
    return task, vocab


def _parse_selection(parser) -> SelectionSpec:
    if not parser.has_section("selection"):
        return SelectionSpec()
    section = parser["selection"]
    mode = section.get("mode", "none")
    if mode not in ("none", "top_k", "percentile"):
        raise ConfigError(f"selection mode must be none, top_k, or percentile, got {mode!r}")
    if mode == "top_k":
        k = _get_int(section, "k", 0)
        if k < 1:
            raise ConfigError("selection mode top_k requires a positive k")
        return SelectionSpec(mode="top_k", k=k)
    if mode == "percentile":
        p = _get_float(section, "percentile", 0.0)
        if not 0 < p <= 100:
            raise ConfigError("selection percentile must lie in (0, 100]")
        return SelectionSpec(mode="percentile", percentile=p)
    return SelectionSpec()


def _parse_svm(section) -> SvmConfig:
    gamma_raw = section.get("gamma", "automatic")
    if gamma_raw == "automatic":
        gamma_mode, gamma = "automatic", None
    else:
        try:
            gamma = float(gamma_raw)
        except ValueError:
            raise ConfigError(f"svm gamma must be 'automatic' or a number, got {gamma_raw!r}") from None
        gamma_mode = "explicit"
    try:
        return SvmConfig(
            c=_get_float(section, "c", 0.0538),
            gamma_mode=gamma_mode,
            gamma=gamma,
            tolerance=_get_float(section, "tolerance", 1e-3),
            max_passes=_get_int(section, "max_passes", 10_000),
        )
    except ValidationError as exc:
        raise ConfigError(f"[svm]: {exc}") from None


def _parse_forest(section, seed: int) -> ForestConfig:
    raw_depth = _get_float(section, "max_depth", 7.0)
    depth = math.floor(raw_depth)
    fps_raw = section.get("features_per_split", "sqrt")
    fps: str | int = fps_raw
    if fps_raw not in ("sqrt", "all"):
        try:
            fps = int(fps_raw)
        except ValueError:
            raise ConfigError(
                f"features_per_split must be sqrt, all, or an integer, got {fps_raw!r}"
            ) from None
    try:
        return ForestConfig(
            n_trees=_get_int(section, "n_trees", 100),
            max_depth=depth,
            min_samples_split=_get_int(section, "min_samples_split", 2),
            features_per_split=fps,
            seed=seed,
            max_depth_raw=raw_depth if raw_depth != depth else None,
        )
    except ValidationError as exc:
        raise ConfigError(f"[forest]: {exc}") from None


def _parse_paths(value: str) -> tuple[Path, ...]:
    return tuple(Path(p.strip()) for p in value.split(",") if p.strip())


def load_run_config(path: str | Path, check_paths: bool = True) -> RunConfig:
    """Parse and validate a pipeline run configuration."""
    parser = _read_ini(path)
    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]
    task, vocab = _parse_vocab(run)
    seed = _get_int(run, "seed", 0)
    output_dir = Path(run.get("output_dir", "out"))
    standardize = _get_bool(run, "standardize", True)

    data: dict[str, Path] = {}
    if parser.has_section("data"):
        for key, value in parser["data"].items():
            if value.strip():
                data[key] = Path(value.strip())

    present = [s for s in _CLASSIFIER_SECTIONS if parser.has_section(s)]
    if len(present) != 1:
        raise ConfigError(
            f"{path}: exactly one of [svm], [forest], [knn], or [ensemble] is "
            f"required, found {present or 'none'}"
        )
    kind = present[0]
    svm_cfg = _parse_svm(parser["svm"]) if kind == "svm" else None
    forest_cfg = _parse_forest(parser["forest"], seed) if kind == "forest" else None
    knn_cfg = None
    if kind == "knn":
        try:
            knn_cfg = KnnConfig(k_neighbors=_get_int(parser["knn"], "k_neighbors", 5))
        except ValidationError as exc:
            raise ConfigError(f"[knn]: {exc}") from None
    ensemble_cfg = None
    probability_files: tuple[Path, ...] = ()
    if kind == "ensemble":
        section = parser["ensemble"]
        files_raw = section.get("probability_files", "")
        probability_files = _parse_paths(files_raw)
        if not probability_files:
            raise ConfigError("[ensemble] probability_files must list at least one file")
        weights_raw = section.get("weights", "")
        if weights_raw.strip():
            try:
                weights = tuple(float(w) for w in weights_raw.split(","))
            except ValueError:
                raise ConfigError(f"[ensemble] weights must be numbers, got {weights_raw!r}") from None
        else:
            weights = tuple(0.5 for _ in probability_files) if len(probability_files) == 2 else tuple(
                1.0 for _ in probability_files
            )
        try:
            ensemble_cfg = EnsembleConfig(weights)
        except ValidationError as exc:
            raise ConfigError(f"[ensemble]: {exc}") from None
        if len(weights) != len(probability_files):
            raise ConfigError(
                f"[ensemble] lists {len(probability_files)} files but {len(weights)} weights"
            )

    pseudo_cfg = None
    scores_file = None
    if parser.has_section("pseudo_label"):
        section = parser["pseudo_label"]
        try:
            pseudo_cfg = PseudoLabelConfig(
                confidence_threshold=_get_float(section, "confidence_threshold", 0.9),
                max_rounds=_get_int(section, "max_rounds", 1),
            )
        except ValidationError as exc:
            raise ConfigError(f"[pseudo_label]: {exc}") from None
        scores_raw = section.get("scores", "")
        if scores_raw.strip():
            scores_file = Path(scores_raw.strip())

    synthetic_cfg = None
    if parser.has_section("synthetic"):
        section = parser["synthetic"]
        try:
            synthetic_cfg = SyntheticSpec(
                n_train=_get_int(section, "n_train", 600),
                n_test=_get_int(section, "n_test", 200),
                n_unlabeled=_get_int(section, "n_unlabeled", 0),
                n_features=_get_int(section, "n_features", 500),
                n_informative=_get_int(section, "n_informative", 20),
                separation=_get_float(section, "separation", 2.0),
                seed=seed,
            )
        except ValidationError as exc:
            raise ConfigError(f"[synthetic]: {exc}") from None

    cfg = RunConfig(
        task=task,
        vocab=vocab,
        seed=seed,
        output_dir=output_dir,
        standardize=standardize,
        data=data,
        selection=_parse_selection(parser),
        classifier_kind=kind,
        svm=svm_cfg,
        forest=forest_cfg,
        knn=knn_cfg,
        ensemble=ensemble_cfg,
        probability_files=probability_files,
        pseudo=pseudo_cfg,
        scores_file=scores_file,
        synthetic=synthetic_cfg,
    )
    if check_paths:
        validate_paths(cfg)
    return cfg


@dataclass(frozen=True)
class GeneratorConfig:
    task: str
    vocab: ClassVocabulary
    seed: int
    output_dir: Path
    spec: SyntheticSpec


def load_generator_config(path: str | Path) -> GeneratorConfig:
    """Parse only what gen-synthetic needs: [run] plus an optional [synthetic].

    Other sections (data paths, classifiers) are left for the pipeline
    commands, so one config file can drive generation and the runs on the
    generated files.
    """
    parser = _read_ini(path)
    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]
    task, vocab = _parse_vocab(run)
    seed = _get_int(run, "seed", 0)
    output_dir = Path(run.get("output_dir", "out"))
    if parser.has_section("synthetic"):
        section = parser["synthetic"]
        try:
            spec = SyntheticSpec(
                n_train=_get_int(section, "n_train", 600),
                n_test=_get_int(section, "n_test", 200),
                n_unlabeled=_get_int(section, "n_unlabeled", 0),
                n_features=_get_int(section, "n_features", 500),
                n_informative=_get_int(section, "n_informative", 20),
                separation=_get_float(section, "separation", 2.0),
                seed=seed,
            )
        except ValidationError as exc:
            raise ConfigError(f"[synthetic]: {exc}") from None
    else:
        spec = SyntheticSpec(seed=seed)
    return GeneratorConfig(task, vocab, seed, output_dir, spec)


def validate_paths(cfg: RunConfig) -> None:
    """Every path the config references must exist at validation time."""
    missing = [str(p) for p in cfg.data.values() if not p.exists()]
    missing += [str(p) for p in cfg.probability_files if not p.exists()]
    if cfg.scores_file is not None and not cfg.scores_file.exists():
        missing.append(str(cfg.scores_file))
    if missing:
        raise ConfigError(f"config references missing file(s): {missing}")
