"""Training protocol: uniform sampling, per-factor updates, reconstruction.

A :class:`FactorNetworkBank` holds one network per factor, stored as stacked
arrays (one leading factor axis per layer) so a training step updates every
factor with a handful of vectorised array operations.  The arithmetic is
identical to composing the scalar :mod:`factoredq.neuralnet` primitives
factor by factor, which the test-suite verifies directly; ``params_of`` /
``state_of`` expose per-factor views for that purpose.

Two learning rules are supported:

* mixture of experts: every factor independently regresses the observed
  reward onto its own selected output unit;
* factored Q: all factors share one residual, the observed reward minus the
  sum of their selected outputs.

Reconstruction assembles the joint table from the per-factor outputs: the
factored-Q rule sums them, the mixture of experts averages them (divide by
the factor count).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .errors import ConfigurationError, InvalidInputError, TrainingDivergenceError
from .factorization import (
    Factorization,
    factorization_from_json,
    factorization_to_json,
    local_action_of,
)
from .games import (
    GameSpec,
    QTable,
    enumerate_joint_types,
    game_from_json,
    game_to_json,
    true_q_table,
)
from .neuralnet import MLPParams, NetConfig, OptimizerState, init_network
from .seeding import derive_seed


class LearningRule(str, Enum):
    MIXTURE_OF_EXPERTS = "moe"
    FACTORED_Q = "fq"


@dataclass(frozen=True)
class TrainConfig:
    """Protocol parameters for one training run.

    ``net.input_dim`` and ``net.output_dim`` act as placeholders; the bank
    replaces them per factor with the conditioning-input width and the local
    action space.
    """

    rule: LearningRule
    samples: int = 100_000
    seed: int = 0
    eval_every: int = 1000
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self) -> None:
        if self.samples < 0:
            raise ConfigurationError("samples must be non-negative")
        if self.eval_every <= 0:
            raise ConfigurationError("eval_every must be positive")


@dataclass
class TrainingCurve:
    """Checkpoint series recorded during training (strictly increasing steps)."""

    steps: list[int] = field(default_factory=list)
    mse_all: list[float] = field(default_factory=list)
    value_loss: list[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ReconstructedQ:
    """A reconstructed joint table plus the provenance that produced it."""

    qtable: QTable
    game: GameSpec
    factorization: Factorization
    rule: LearningRule
    seed: int


# ---------------------------------------------------------------------------
# Conditioning inputs
# ---------------------------------------------------------------------------


def factor_input(spec: GameSpec, agents: tuple[int, ...], theta: Sequence[int]) -> list[float]:
    """Network input for one factor: a constant bias plus observed type bits.

    Non-Bayesian games feed the constant scalar alone.  In the firefighting
    game each member contributes the burn state of its two reachable houses;
    a factor containing every agent receives each house bit once instead.
    """
    if not spec.bayesian:
        return [1.0]
    bits: list[float] = [1.0]
    if len(agents) == spec.n:
        bits.extend(float(b) for b in theta)
    else:
        for agent in agents:
            bits.append(float(theta[agent]))
            bits.append(float(theta[agent + 1]))
    return bits


def _all_type_inputs(spec: GameSpec, factorization: Factorization) -> np.ndarray:
    """Inputs for every joint type, shape (type_space_size, C, input_dim)."""
    types = enumerate_joint_types(spec) if spec.bayesian else [()]
    rows = [
        [factor_input(spec, factor.agents, theta) for factor in factorization.factors]
        for theta in types
    ]
    return np.asarray(rows, dtype=float)


def _local_index_table(spec: GameSpec, factorization: Factorization) -> np.ndarray:
    """Local action index of every factor for every joint action, shape (C, |A|)."""
    radix = spec.actions_per_agent
    digits = np.array(
        list(itertools.product(range(radix), repeat=spec.n)), dtype=np.int64
    )  # (|A|, n)
    table = np.empty((factorization.num_factors, digits.shape[0]), dtype=np.int64)
    for e, factor in enumerate(factorization.factors):
        idx = np.zeros(digits.shape[0], dtype=np.int64)
        for agent in factor.agents:
            idx = idx * radix + digits[:, agent]
        table[e] = idx
    return table


# ---------------------------------------------------------------------------
# The bank
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FactorNetworkBank:
    """One network per factor, stacked along a leading factor axis."""

    game: GameSpec
    factorization: Factorization
    net_config: NetConfig  # concrete dims shared by every factor
    weights: list[np.ndarray]  # per layer: (C, fan_out, fan_in)
    biases: list[np.ndarray]  # per layer: (C, fan_out)
    mean_sq_weights: list[np.ndarray]
    mean_sq_biases: list[np.ndarray]

    @property
    def num_factors(self) -> int:
        return self.factorization.num_factors

    def params_of(self, e: int) -> MLPParams:
        """Per-factor parameter views; mutating them mutates the bank."""
        return MLPParams([w[e] for w in self.weights], [b[e] for b in self.biases])

    def state_of(self, e: int) -> OptimizerState:
        return OptimizerState(
            [m[e] for m in self.mean_sq_weights], [m[e] for m in self.mean_sq_biases]
        )


def build_bank(
    spec: GameSpec, factorization: Factorization, config: TrainConfig
) -> FactorNetworkBank:
    """Initialise one network per factor.

    Each factor's weights are seeded from (run seed, factor members), so the
    initialisation is independent of factor storage order and of which other
    factors share the bank.
    """
    if factorization.n != spec.n:
        raise ConfigurationError("factorization agent count disagrees with the game")
    sizes = {factor.size for factor in factorization.factors}
    if len(sizes) != 1:
        raise ConfigurationError("all factors in a bank must have the same size")
    for factor in factorization.factors:
        if factor.num_actions != spec.actions_per_agent:
            raise ConfigurationError("factor action count disagrees with the game")

    probe = factor_input(spec, factorization.factors[0].agents, (0,) * spec.params.n_houses)
    net_config = replace(
        config.net,
        input_dim=len(probe),
        output_dim=factorization.factors[0].local_action_space,
    )

    per_factor = [
        init_network(net_config, derive_seed(config.seed, "net-init", factor.agents))
        for factor in factorization.factors
    ]
    n_layers = len(per_factor[0][0].weights)
    weights = [np.stack([p.weights[l] for p, _ in per_factor]) for l in range(n_layers)]
    biases = [np.stack([p.biases[l] for p, _ in per_factor]) for l in range(n_layers)]
    msq_w = [np.zeros_like(w) for w in weights]
    msq_b = [np.zeros_like(b) for b in biases]
    return FactorNetworkBank(spec, factorization, net_config, weights, biases, msq_w, msq_b)


# ---------------------------------------------------------------------------
# Vectorised step kernel
# ---------------------------------------------------------------------------


def _hidden_chain(
    bank: FactorNetworkBank, inputs: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Activations [inputs, h1, ..., hL] and pre-activations per hidden layer."""
    slope = bank.net_config.leaky_slope
    activations = [inputs]
    pre = []
    h = inputs
    for w, b in zip(bank.weights[:-1], bank.biases[:-1]):
        z = (w @ h[:, :, None])[:, :, 0] + b
        pre.append(z)
        h = np.where(z > 0.0, z, slope * z)
        activations.append(h)
    return activations, pre


_ARANGE_CACHE: dict[int, np.ndarray] = {}


def _arange(n: int) -> np.ndarray:
    cached = _ARANGE_CACHE.get(n)
    if cached is None:
        cached = _ARANGE_CACHE.setdefault(n, np.arange(n))
    return cached


def _apply_step(
    bank: FactorNetworkBank,
    inputs: np.ndarray,
    local_idx: np.ndarray,
    reward: float,
    shared_residual: bool,
) -> None:
    """One RMSprop update of every factor network (in place)."""
    cfg = bank.net_config
    rho, lr, eps, slope = cfg.rms_decay, cfg.learning_rate, cfg.rms_epsilon, cfg.leaky_slope
    factors = _arange(bank.num_factors)

    activations, pre = _hidden_chain(bank, inputs)
    top = activations[-1]
    w_out = bank.weights[-1]
    b_out = bank.biases[-1]
    w_sel = w_out[factors, local_idx]  # (C, hidden)
    b_sel = b_out[factors, local_idx]  # (C,)
    predicted = (w_sel * top).sum(axis=1) + b_sel

    if shared_residual:
        residual = np.full(bank.num_factors, reward - predicted.sum())
    else:
        residual = reward - predicted
    if not np.all(np.isfinite(residual)):
        raise TrainingDivergenceError("non-finite residual during training")

    d_out = -residual  # (C,)
    g_w_row = d_out[:, None] * top
    d_hidden = w_sel * d_out[:, None]

    # Output head: squared-gradient means decay everywhere, only the selected
    # rows carry gradient (matching a dense zero-elsewhere gradient).
    m_w_out = bank.mean_sq_weights[-1]
    m_b_out = bank.mean_sq_biases[-1]
    m_w_out *= rho
    m_b_out *= rho
    m_row = m_w_out[factors, local_idx]
    m_row += (1.0 - rho) * g_w_row * g_w_row
    m_w_out[factors, local_idx] = m_row
    w_out[factors, local_idx] = w_sel - lr * g_w_row / (np.sqrt(m_row) + eps)
    m_bias = m_b_out[factors, local_idx]
    m_bias += (1.0 - rho) * d_out * d_out
    m_b_out[factors, local_idx] = m_bias
    b_out[factors, local_idx] = b_sel - lr * d_out / (np.sqrt(m_bias) + eps)

    # Hidden layers: dense gradients.  The upstream signal must flow through
    # the pre-update weights, so propagate before applying the step.
    for layer in range(cfg.hidden_layers - 1, -1, -1):
        z = pre[layer]
        d_z = d_hidden * np.where(z > 0.0, 1.0, slope)
        g_w = d_z[:, :, None] * activations[layer][:, None, :]
        w = bank.weights[layer]
        b = bank.biases[layer]
        if layer > 0:
            d_hidden = (w.transpose(0, 2, 1) @ d_z[:, :, None])[:, :, 0]
        m_w = bank.mean_sq_weights[layer]
        m_b = bank.mean_sq_biases[layer]
        m_w *= rho
        m_w += (1.0 - rho) * g_w * g_w
        w -= lr * g_w / (np.sqrt(m_w) + eps)
        m_b *= rho
        m_b += (1.0 - rho) * d_z * d_z
        b -= lr * d_z / (np.sqrt(m_b) + eps)


def _step_arrays(
    bank: FactorNetworkBank, a: Sequence[int], theta: Optional[Sequence[int]]
) -> tuple[np.ndarray, np.ndarray]:
    if bank.game.bayesian:
        if theta is None:
            raise InvalidInputError("this game requires a joint type")
        if len(theta) != bank.game.params.n_houses:
            raise InvalidInputError("joint type has the wrong length")
    elif theta is not None:
        raise InvalidInputError("this game does not take a joint type")
    inputs = np.asarray(
        [factor_input(bank.game, fac.agents, theta or ()) for fac in bank.factorization.factors]
    )
    local_idx = np.asarray(
        [local_action_of(fac, a) for fac in bank.factorization.factors], dtype=np.int64
    )
    return inputs, local_idx


def moe_step(
    bank: FactorNetworkBank,
    a: Sequence[int],
    reward: float,
    theta: Optional[Sequence[int]] = None,
) -> FactorNetworkBank:
    """Independent update: each factor regresses the reward on its own output."""
    inputs, local_idx = _step_arrays(bank, a, theta)
    _apply_step(bank, inputs, local_idx, float(reward), shared_residual=False)
    return bank


def fq_step(
    bank: FactorNetworkBank,
    a: Sequence[int],
    reward: float,
    theta: Optional[Sequence[int]] = None,
) -> FactorNetworkBank:
    """Joint update: all factors share the residual of their summed outputs."""
    inputs, local_idx = _step_arrays(bank, a, theta)
    _apply_step(bank, inputs, local_idx, float(reward), shared_residual=True)
    return bank


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def _bank_outputs(bank: FactorNetworkBank, inputs: np.ndarray) -> np.ndarray:
    """Full output tables for one conditioning input, shape (C, local_actions)."""
    activations, _ = _hidden_chain(bank, inputs)
    return (bank.weights[-1] @ activations[-1][:, :, None])[:, :, 0] + bank.biases[-1]


def reconstruct(
    bank: FactorNetworkBank, rule: LearningRule, seed: int = 0
) -> ReconstructedQ:
    """Assemble the joint table: sum of factor outputs (FQ) or their mean (MoE)."""
    spec = bank.game
    table = _local_index_table(spec, bank.factorization)
    type_inputs = _all_type_inputs(spec, bank.factorization)
    gather_rows = np.arange(bank.num_factors)[:, None]
    values = np.empty((spec.type_space_size, spec.num_joint_actions))
    for t in range(spec.type_space_size):
        outputs = _bank_outputs(bank, type_inputs[t])
        per_factor = outputs[gather_rows, table]  # (C, |A|)
        if rule is LearningRule.FACTORED_Q:
            values[t] = per_factor.sum(axis=0)
        else:
            values[t] = per_factor.mean(axis=0)
    return ReconstructedQ(QTable(values), spec, bank.factorization, rule, seed)


# ---------------------------------------------------------------------------
# The training protocol
# ---------------------------------------------------------------------------


def train(
    spec: GameSpec, factorization: Factorization, config: TrainConfig
) -> tuple[FactorNetworkBank, ReconstructedQ, TrainingCurve]:
    """Run the sampling/update protocol and reconstruct the joint table.

    Joint actions (and joint types, when Bayesian) are sampled uniformly at
    random; the exact game reward of each sample is regressed by every factor
    network under the configured rule.  The whole run is a deterministic
    function of ``config.seed``.
    """
    bank = build_bank(spec, factorization, config)
    q_true = true_q_table(spec)
    table = _local_index_table(spec, factorization)
    type_inputs = _all_type_inputs(spec, factorization)

    rng = np.random.default_rng(config.seed)
    n_actions = spec.num_joint_actions
    action_draws = rng.integers(0, n_actions, size=config.samples)
    if spec.bayesian:
        type_draws = rng.integers(0, spec.type_space_size, size=config.samples)
    else:
        type_draws = np.zeros(config.samples, dtype=np.int64)
    rewards = q_true.values[type_draws, action_draws]
    local_by_step = table.T[action_draws]  # (samples, C), row-contiguous

    curve = TrainingCurve()
    shared = config.rule is LearningRule.FACTORED_Q
    eval_every = config.eval_every
    for step in range(config.samples):
        _apply_step(
            bank,
            type_inputs[type_draws[step]],
            local_by_step[step],
            rewards[step],
            shared,
        )
        if (step + 1) % eval_every == 0:
            snapshot = reconstruct(bank, config.rule, config.seed)
            curve.steps.append(step + 1)
            curve.mse_all.append(metrics.mse_all(q_true, snapshot.qtable))
            curve.value_loss.append(metrics.value_loss(q_true, snapshot.qtable))
    return bank, reconstruct(bank, config.rule, config.seed), curve


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def bank_to_json(bank: FactorNetworkBank) -> str:
    doc = {
        "game": json.loads(game_to_json(bank.game)),
        "factorization": json.loads(factorization_to_json(bank.factorization)),
        "net_config": {
            "input_dim": bank.net_config.input_dim,
            "output_dim": bank.net_config.output_dim,
            "hidden_units": bank.net_config.hidden_units,
            "hidden_layers": bank.net_config.hidden_layers,
            "leaky_slope": bank.net_config.leaky_slope,
            "learning_rate": bank.net_config.learning_rate,
            "rms_decay": bank.net_config.rms_decay,
            "rms_epsilon": bank.net_config.rms_epsilon,
        },
        "weights": [w.tolist() for w in bank.weights],
        "biases": [b.tolist() for b in bank.biases],
        "mean_sq_weights": [m.tolist() for m in bank.mean_sq_weights],
        "mean_sq_biases": [m.tolist() for m in bank.mean_sq_biases],
    }
    return json.dumps(doc, sort_keys=True)


def bank_from_json(text: str) -> FactorNetworkBank:
    doc = json.loads(text)
    return FactorNetworkBank(
        game=game_from_json(json.dumps(doc["game"])),
        factorization=factorization_from_json(json.dumps(doc["factorization"])),
        net_config=NetConfig(**doc["net_config"]),
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        mean_sq_weights=[np.asarray(m, dtype=float) for m in doc["mean_sq_weights"]],
        mean_sq_biases=[np.asarray(m, dtype=float) for m in doc["mean_sq_biases"]],
    )


def reconstruction_to_json(recon: ReconstructedQ) -> str:
    doc = {
        "game": json.loads(game_to_json(recon.game)),
        "factorization": json.loads(factorization_to_json(recon.factorization)),
        "rule": recon.rule.value,
        "seed": recon.seed,
        "shape": list(recon.qtable.values.shape),
        "values": recon.qtable.values.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def reconstruction_from_json(text: str) -> ReconstructedQ:
    doc = json.loads(text)
    values = np.asarray(doc["values"], dtype=float)
    if list(values.shape) != doc["shape"]:
        raise InvalidInputError("value array disagrees with its shape header")
    return ReconstructedQ(
        qtable=QTable(values),
        game=game_from_json(json.dumps(doc["game"])),
        factorization=factorization_from_json(json.dumps(doc["factorization"])),
        rule=LearningRule(doc["rule"]),
        seed=int(doc["seed"]),
    )
