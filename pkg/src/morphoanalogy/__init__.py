"""Morphological analogy detection and solving.

Pipeline: parse inflection corpora into transformation pairs, extract
analogical quadruples by shared feature bundle, augment them through the
analogy postulates, train a character-CNN word embedder with classification
and regression heads on the built-in numeric kernel, then evaluate by
thresholded scores, nearest-neighbor retrieval, dropout perturbation, and
symbolic baselines.
"""

from .augment import (
    augment_for_classification,
    augment_for_evaluation,
    augment_for_regression,
    invalid_forms,
    sample_invalid,
    valid_forms,
)
from .corpus import (
    CharIndex,
    CorpusFormatError,
    LabeledQuadruple,
    Quadruple,
    TransformationPair,
    Vocabulary,
    build_charset,
    build_vocabulary,
    extract_analogies,
    parse_inflection_file,
    random_split,
)
from .trainer import (
    Checkpoint,
    CheckpointError,
    TrainConfig,
    TrainingError,
    load_checkpoint,
    save_checkpoint,
    train_classifier,
    train_regressor,
)
from .evaluator import (
    ClassReport,
    PerturbationReport,
    eval_classifier,
    eval_regressor,
    perturbation_study,
    solve_by_retrieval,
    t_test,
)
from .baselines import (
    SolverConfig,
    alea_solve,
    feature_arithmetic_classify,
    parallelogram_solve,
    solver_as_classifier,
)

__version__ = "0.1.0"

__all__ = [
    "CharIndex",
    "ClassReport",
    "Checkpoint",
    "CheckpointError",
    "CorpusFormatError",
    "LabeledQuadruple",
    "PerturbationReport",
    "Quadruple",
    "SolverConfig",
    "TrainConfig",
    "TrainingError",
    "TransformationPair",
    "Vocabulary",
    "alea_solve",
    "augment_for_classification",
    "augment_for_evaluation",
    "augment_for_regression",
    "build_charset",
    "build_vocabulary",
    "eval_classifier",
    "eval_regressor",
    "extract_analogies",
    "feature_arithmetic_classify",
    "invalid_forms",
    "load_checkpoint",
    "parallelogram_solve",
    "parse_inflection_file",
    "perturbation_study",
    "random_split",
    "sample_invalid",
    "save_checkpoint",
    "solve_by_retrieval",
    "solver_as_classifier",
    "t_test",
    "train_classifier",
    "train_regressor",
    "valid_forms",
]
