"""Random-forest imitation: distil a forest into a compact ReLU network."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .data import (Dataset, FeatureStats, compute_feature_stats, limit_per_class, load_csv,
                   make_synthetic, normalize, split_dataset)
from .datagen import GenerationConfig, confidence_distribution, generate_from_forest, sample_stream
from .forest import (RandomForest, TreeTrainParams, compute_class_weights, load_forest,
                     predict_forest, save_forest, train_forest)
from .imitation import ImitationReport, evaluate_accuracy, evaluate_fidelity, imitate
from .mapping import best_split_mapping, count_parameters, direct_mapping_size, map_direct
from .neuralnet import Mlp, TrainConfig, forward, gradient_check, load_mlp, mlp_new, save_mlp

__all__ = [
    "BACKEND", "Dataset", "FeatureStats", "compute_feature_stats", "limit_per_class", "load_csv",
    "make_synthetic", "normalize", "split_dataset", "GenerationConfig", "confidence_distribution",
    "generate_from_forest", "sample_stream", "RandomForest", "TreeTrainParams",
    "compute_class_weights", "load_forest", "predict_forest", "save_forest", "train_forest",
    "ImitationReport", "evaluate_accuracy", "evaluate_fidelity", "imitate", "best_split_mapping",
    "count_parameters", "direct_mapping_size", "map_direct", "Mlp", "TrainConfig", "forward",
    "gradient_check", "load_mlp", "mlp_new", "save_mlp",
]
