"""Linear detection models, feature-space attacks and adversarial retraining."""

from .attacks import AttackResult, CoordinateGreedy, SaltPepper, coordinate_greedy, salt_pepper
from .l1 import CoverSet, MatchCount, SweepResult, l1_sweep
from .linear import HingeLinearClassifier, is_malicious, score
from .metrics import EvalReport, evasion_robustness, roc_auc, roc_from_scores
from .retrain import RetrainConfig, RetrainResult, retrain_iterative

__all__ = [
    "AttackResult",
    "CoordinateGreedy",
    "CoverSet",
    "EvalReport",
    "HingeLinearClassifier",
    "MatchCount",
    "RetrainConfig",
    "RetrainResult",
    "SaltPepper",
    "SweepResult",
    "coordinate_greedy",
    "evasion_robustness",
    "is_malicious",
    "l1_sweep",
    "retrain_iterative",
    "roc_auc",
    "roc_from_scores",
    "salt_pepper",
    "score",
]
