"""Segment classification pipeline.

ANOVA F-value feature selection feeding SVM / random forest / KNN
classifiers, weighted soft voting over model probability files, a
pseudo-labeling loop, and F1/UAR evaluation.
"""

from .dataset import (
    ClassVocabulary,
    FeatureTable,
    LabelVector,
    Standardizer,
    align,
    apply_standardizer,
    fit_standardizer,
    load_feature_table,
    load_labels,
    vocabulary_for_task,
)
from .ensemble import (
    EnsembleConfig,
    ProbabilityMatrix,
    PseudoLabelConfig,
    load_probabilities,
    predict_from_probs,
    pseudo_label_round,
    soft_vote,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    NumericError,
    ParseError,
    PipelineError,
    ValidationError,
)
from .forest import ForestConfig, ForestModel, forest_predict, forest_scores, forest_train
from .knn import KnnConfig, KnnModel, knn_predict, knn_train
from .metrics import ConfusionMatrix, ScoreReport, confusion, score
from .persistence import PipelineModel, load_model, save_model
from .selection import (
    SelectionReport,
    anova_f_scores,
    apply_selection,
    export_scores,
    select_percentile,
    select_top_k,
)
from .svm import (
    BinarySvmModel,
    SvmConfig,
    SvmModel,
    svm_decision,
    svm_predict,
    svm_scores,
    svm_train,
)
from .synthetic import SyntheticSpec, generate_blobs

__version__ = "0.1.0"
