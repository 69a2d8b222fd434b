from .dataset import Dataset, MaxFeatures, TrainConfig
from .models import (
    ForestModel,
    GaussianNbModel,
    LinearSvmModel,
    Model,
    TreeModel,
    Variant,
    forest_config,
    load_model,
    save_model,
    train_decision_tree,
    train_gaussian_nb,
    train_linear_svm,
    train_random_forest,
)
from .tree import candidate_count

__all__ = [
    "Dataset", "MaxFeatures", "TrainConfig", "ForestModel", "GaussianNbModel", "LinearSvmModel",
    "Model", "TreeModel", "Variant", "forest_config", "load_model", "save_model",
    "train_decision_tree", "train_gaussian_nb", "train_linear_svm", "train_random_forest",
    "candidate_count",
]
