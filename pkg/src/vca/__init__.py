"""Voice-conversion augmentation toolkit for speaker recognition on
defective datasets: scenario construction, source selection (random and
nearest-neighbour), synthetic conversion, training, verification metrics,
and a seeded simulation harness."""

from .conversion import SyntheticVCParams, apply_plan, convert_synthetic
from .errors import DataError, VcaError
from .metrics import EvalReport, Trial, eer, min_dcf, score_trials
from .records import UtteranceRecord, load_manifest, save_manifest
from .scenarios import Scenario, ScenarioConfig, build_imbalanced, build_semi, build_small
from .selection import AugmentationPlan, ConversionJob, cosine, plan_nn, plan_rs, top_k
from .simulate import UniverseConfig, generate_universe, run_experiment
from .store import EmbeddingStore, load_store, save_store
from .trainer import LinearSpeakerModel, TrainConfig, embed, train, train_phi

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan",
    "ConversionJob",
    "DataError",
    "EmbeddingStore",
    "EvalReport",
    "LinearSpeakerModel",
    "Scenario",
    "ScenarioConfig",
    "SyntheticVCParams",
    "TrainConfig",
    "Trial",
    "UniverseConfig",
    "UtteranceRecord",
    "VcaError",
    "apply_plan",
    "build_imbalanced",
    "build_semi",
    "build_small",
    "convert_synthetic",
    "cosine",
    "eer",
    "embed",
    "generate_universe",
    "load_manifest",
    "load_store",
    "min_dcf",
    "plan_nn",
    "plan_rs",
    "run_experiment",
    "save_manifest",
    "save_store",
    "score_trials",
    "top_k",
    "train",
    "train_phi",
]
