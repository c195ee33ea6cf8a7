"""factoredq: how well do factored neural value functions represent
cooperative one-shot games?

The package trains one small network per coordination-graph factor on exact
game rewards, reconstructs the joint action-value table from the factors,
and scores the reconstruction with rank- and error-based measures.
"""

from .errors import ConfigurationError, InvalidInputError, TrainingDivergenceError
from .factorization import Factor, Factorization, Scheme, build_factorization, local_action_of
from .games import (
    DEFAULT_TIE_TOL,
    GameId,
    GameSpec,
    QTable,
    all_games,
    enumerate_joint_actions,
    enumerate_joint_types,
    evaluate_reward,
    joint_action_from_index,
    joint_action_index,
    make_game,
    optimal_action_set,
    true_q_table,
    type_from_index,
    type_index,
)
from .harness import (
    DEFAULT_GAMES,
    DEFAULT_METHODS,
    METHODS,
    ExperimentConfig,
    RunResult,
    run_cell,
    run_experiment,
)
from .metrics import MetricsReport, evaluate
from .neuralnet import NetConfig
from .training import (
    FactorNetworkBank,
    LearningRule,
    ReconstructedQ,
    TrainConfig,
    TrainingCurve,
    build_bank,
    fq_step,
    moe_step,
    reconstruct,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "InvalidInputError",
    "TrainingDivergenceError",
    "Factor",
    "Factorization",
    "Scheme",
    "build_factorization",
    "local_action_of",
    "DEFAULT_TIE_TOL",
    "GameId",
    "GameSpec",
    "QTable",
    "all_games",
    "enumerate_joint_actions",
    "enumerate_joint_types",
    "evaluate_reward",
    "joint_action_from_index",
    "joint_action_index",
    "make_game",
    "optimal_action_set",
    "true_q_table",
    "type_from_index",
    "type_index",
    "DEFAULT_GAMES",
    "DEFAULT_METHODS",
    "METHODS",
    "ExperimentConfig",
    "RunResult",
    "run_cell",
    "run_experiment",
    "MetricsReport",
    "evaluate",
    "NetConfig",
    "FactorNetworkBank",
    "LearningRule",
    "ReconstructedQ",
    "TrainConfig",
    "TrainingCurve",
    "build_bank",
    "fq_step",
    "moe_step",
    "reconstruct",
    "train",
]
