"""Privacy adversarial networks.

Feature encoders trained with alternating objectives so that a service
provider keeps task accuracy high while third-party attackers gain little
from attribute inference or raw-input reconstruction, plus the evaluation
harness and noise/PCA baselines to compare against.
"""

__version__ = "0.1.0"

from .baselines import (
    HybridSpec,
    NoiseSpec,
    PcaBasis,
    dp_laplace,
    expected_mse,
    fit_pca,
    fl_gaussian,
    hybrid_transform,
    run_dnn_baseline,
    run_hybrid_baseline,
    run_noise_baseline,
)
from .config import RunConfig, load_config, parse_config, save_config, serialize_config
from .data import Dataset, load_idx, make_digits, make_synthetic_dual, save_idx
from .errors import ConfigError, FormatError, TrainingDiverged
from .evaluation import (
    AttackerBudget,
    AttackerEnsemble,
    TradeoffPoint,
    encode_features,
    eval_privacy_p1,
    eval_privacy_p2,
    eval_utility,
    evaluate_encoder,
    pareto_front,
    tradeoff_score,
    train_third_party_attackers,
)
from .models import (
    BuildError,
    Model,
    build_encoder,
    build_mlp_classifier,
    build_reconstructor,
    forward,
    mirror_of,
)
from .serialization import load_model, load_tensors, save_model, save_tensors
from .sweep import run_lambda_sweep
from .training import (
    Architectures,
    PanModels,
    TrainingConfig,
    TrainingHistory,
    train_pan,
    train_plain_dnn,
)

__all__ = [
    "__version__",
    "Architectures", "AttackerBudget", "AttackerEnsemble", "BuildError",
    "ConfigError", "Dataset", "FormatError", "HybridSpec", "Model",
    "NoiseSpec", "PanModels", "PcaBasis", "RunConfig", "TradeoffPoint",
    "TrainingConfig", "TrainingDiverged", "TrainingHistory",
    "build_encoder", "build_mlp_classifier", "build_reconstructor",
    "dp_laplace", "encode_features", "eval_privacy_p1", "eval_privacy_p2",
    "eval_utility", "evaluate_encoder", "expected_mse", "fit_pca",
    "fl_gaussian", "forward", "hybrid_transform", "load_config", "load_idx",
    "load_model", "load_tensors", "make_digits", "make_synthetic_dual",
    "mirror_of", "pareto_front", "parse_config", "run_dnn_baseline",
    "run_hybrid_baseline", "run_lambda_sweep", "run_noise_baseline",
    "save_config", "save_idx", "save_model", "save_tensors",
    "serialize_config", "tradeoff_score", "train_pan", "train_plain_dnn",
    "train_third_party_attackers",
]
