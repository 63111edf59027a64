"""Two-stage resampling for imbalanced classification.

Oversample in input space, train a network, extract body features from the
original data, undersample them, and fine-tune the classifier head. Also
ships the evaluation protocol: imbalance induction, RUS/ROS/SMOTE,
multi-class imbalance metrics and rank-based comparison.
"""

from .dataset import (
    Dataset,
    DataError,
    FoldAssignment,
    class_counts,
    derive_seed,
    load_csv,
    make_rng,
    save_csv,
    stratified_kfold,
    take_subset,
)
from .imbalance import ImbalancePlan, RatioMode, Scenario, class_ratios, induce, minority_mask, target_counts, total_observations
from .metrics import accuracy, average_ranks, avacc, cba, confusion, mavg
from .model import NetConfig, Network, TrainConfig
from .pipeline import StrategySpec, evaluate, run_strategy
from .resampling import ResamplerKind, knn_indices, ros, rus, smote

__version__ = "0.1.0"
