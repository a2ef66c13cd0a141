"""Policy contract, deterministic baselines, and the actor-critic trainer."""

from .a2c import (
    A2CConfig,
    MlpPolicy,
    NonFiniteLoss,
    ObsNormalizer,
    RolloutBatch,
    TrainStats,
    UpdateStats,
    a2c_loss_and_grad,
    a2c_train,
    a2c_update,
    load_checkpoint,
    save_checkpoint,
)
from .mlp import (
    MlpParams,
    ShapeMismatch,
    init_mlp,
    mlp_backward,
    mlp_forward,
    params_to_vector,
    vector_to_params,
)
from .policies import (
    BASELINE_POLICIES,
    BuyAndHoldPolicy,
    HoldPolicy,
    MomentumPolicy,
    RandomPolicy,
    act_hold,
    act_random,
    make_baseline,
)

__all__ = [
    "A2CConfig",
    "MlpPolicy",
    "NonFiniteLoss",
    "ObsNormalizer",
    "RolloutBatch",
    "TrainStats",
    "UpdateStats",
    "a2c_loss_and_grad",
    "a2c_train",
    "a2c_update",
    "load_checkpoint",
    "save_checkpoint",
    "MlpParams",
    "ShapeMismatch",
    "init_mlp",
    "mlp_backward",
    "mlp_forward",
    "params_to_vector",
    "vector_to_params",
    "BASELINE_POLICIES",
    "BuyAndHoldPolicy",
    "HoldPolicy",
    "MomentumPolicy",
    "RandomPolicy",
    "act_hold",
    "act_random",
    "make_baseline",
]
