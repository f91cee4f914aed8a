"""Logic-ensemble classifiers trained to satisfy verified global robustness properties."""
from .booster import BoostConfig, train_booster
from .fixer import FixerConfig, TrainingFailure, train_full
from .model import Atom, Clause, Feature, FeatureSchema, LogicEnsemble, load_model, save_model, score
from .properties import (
    HighConfidence,
    MaxScoreDecrease,
    Monotonicity,
    Redundancy,
    SmallNeighborhood,
    Stability,
)
from .verifier import Verdict, verify

__version__ = "0.1.0"

__all__ = [
    "Atom", "BoostConfig", "Clause", "Feature", "FeatureSchema", "FixerConfig", "HighConfidence",
    "LogicEnsemble", "MaxScoreDecrease", "Monotonicity", "Redundancy", "SmallNeighborhood", "Stability",
    "TrainingFailure", "Verdict", "load_model", "save_model", "score", "train_booster", "train_full", "verify",
]
