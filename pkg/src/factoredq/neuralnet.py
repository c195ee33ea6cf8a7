"""Minimal feed-forward approximator built from scratch.

One network maps a small input vector through leaky-ReLU hidden layers to a
linear output head whose units are the local action values of one factor.
Gradients are derived by hand (no autodiff) so every update is auditable, and
parameters are trained with per-sample RMSprop steps.

Training regresses a scalar target onto a single selected output unit: the
loss for one sample is ``0.5 * residual**2`` with ``residual = target -
prediction``, so the gradient reaching the selected unit is ``-residual`` and
all other output rows receive zero gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError, TrainingDivergenceError


@dataclass(frozen=True)
class NetConfig:
    """Shape and optimizer hyperparameters for one factor network."""

    input_dim: int = 1
    output_dim: int = 1
    hidden_units: int = 16
    hidden_layers: int = 1
    leaky_slope: float = 0.01
    learning_rate: float = 1e-5
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if min(self.input_dim, self.output_dim, self.hidden_units) <= 0:
            raise ConfigurationError("network dimensions must be positive")
        if self.hidden_layers < 1:
            raise ConfigurationError("at least one hidden layer is required")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigurationError("leaky slope must lie in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ConfigurationError("learning rate must be positive")
        if not 0.0 <= self.rms_decay < 1.0:
            raise ConfigurationError("rms decay must lie in [0, 1)")
        if self.rms_epsilon <= 0.0:
            raise ConfigurationError("rms epsilon must be positive")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) per layer, hidden layers first, output head last."""
        dims = [(self.hidden_units, self.input_dim)]
        dims += [(self.hidden_units, self.hidden_units)] * (self.hidden_layers - 1)
        dims.append((self.output_dim, self.hidden_units))
        return dims


@dataclass
class MLPParams:
    """Per-layer weight matrices (fan_out x fan_in) and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class Gradients:
    """Loss gradients with the same layout as MLPParams."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class OptimizerState:
    """Running mean of squared gradients per parameter, initialised to zero."""

    mean_sq_weights: list[np.ndarray]
    mean_sq_biases: list[np.ndarray]


def init_network(config: NetConfig, rng_seed: int) -> tuple[MLPParams, OptimizerState]:
    """Seeded initialisation: weights uniform in +-1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(rng_seed)
    weights, biases = [], []
    for fan_out, fan_in in config.layer_dims():
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    state = OptimizerState(
        [np.zeros_like(w) for w in weights],
        [np.zeros_like(b) for b in biases],
    )
    return MLPParams(weights, biases), state


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0.0, z, slope * z)


def _leaky_grad(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0.0, 1.0, slope)


def _forward_trace(
    params: MLPParams, x: np.ndarray, config: NetConfig
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Activations per layer (inputs first) and hidden pre-activations."""
    activations = [x]
    pre_activations = []
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = w @ h + b
        pre_activations.append(z)
        h = _leaky(z, config.leaky_slope)
        activations.append(h)
    out = params.weights[-1] @ h + params.biases[-1]
    activations.append(out)
    return activations, pre_activations


def forward(params: MLPParams, x: Sequence[float], config: NetConfig) -> np.ndarray:
    """All output-unit values for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (config.input_dim,):
        raise InvalidInputError(f"input shape {x.shape} != ({config.input_dim},)")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("network input must be finite")
    activations, _ = _forward_trace(params, x, config)
    return activations[-1]


def backward(
    params: MLPParams,
    x: Sequence[float],
    output_index: int,
    residual: float,
    config: NetConfig,
) -> Gradients:
    """Gradients of 0.5*residual^2 through one selected output unit.

    ``residual`` is ``target - prediction`` as seen by the caller; only row
    ``output_index`` of the output head carries gradient.
    """
    x = np.asarray(x, dtype=float)
    if not 0 <= output_index < config.output_dim:
        raise InvalidInputError(f"output index {output_index} out of range")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("network input must be finite")
    activations, pre_activations = _forward_trace(params, x, config)

    grad_w = [np.zeros_like(w) for w in params.weights]
    grad_b = [np.zeros_like(b) for b in params.biases]

    d_out = -float(residual)  # d(0.5 r^2)/d prediction
    grad_w[-1][output_index] = d_out * activations[-2]
    grad_b[-1][output_index] = d_out

    d_hidden = d_out * params.weights[-1][output_index]
    for layer in range(config.hidden_layers - 1, -1, -1):
        d_z = d_hidden * _leaky_grad(pre_activations[layer], config.leaky_slope)
        grad_w[layer] = np.outer(d_z, activations[layer])
        grad_b[layer] = d_z
        if layer > 0:
            d_hidden = params.weights[layer].T @ d_z
    return Gradients(grad_w, grad_b)


def rmsprop_update(
    params: MLPParams,
    state: OptimizerState,
    grads: Gradients,
    config: NetConfig,
) -> tuple[MLPParams, OptimizerState]:
    """One RMSprop step, in place: m <- rho*m + (1-rho)*g^2; p <- p - lr*g/(sqrt(m)+eps)."""
    for g in grads.weights + grads.biases:
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("non-finite gradient")
    rho, lr, eps = config.rms_decay, config.learning_rate, config.rms_epsilon
    for p, m, g in zip(params.weights, state.mean_sq_weights, grads.weights):
        m *= rho
        m += (1.0 - rho) * g * g
        p -= lr * g / (np.sqrt(m) + eps)
    for p, m, g in zip(params.biases, state.mean_sq_biases, grads.biases):
        m *= rho
        m += (1.0 - rho) * g * g
        p -= lr * g / (np.sqrt(m) + eps)
    return params, state


# ---------------------------------------------------------------------------
# Serialization (flat arrays with a shape header)
# ---------------------------------------------------------------------------


def params_to_json(params: MLPParams) -> str:
    doc = {
        "shapes": [list(w.shape) for w in params.weights],
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    return json.dumps(doc, sort_keys=True)


def params_from_json(text: str) -> MLPParams:
    doc = json.loads(text)
    weights = [
        np.asarray(flat, dtype=float).reshape(shape)
        for flat, shape in zip(doc["weights"], doc["shapes"])
    ]
    biases = [np.asarray(b, dtype=float) for b in doc["biases"]]
    if len(weights) != len(biases):
        raise InvalidInputError("weight/bias layer counts disagree")
    for w, b in zip(weights, biases):
        if w.shape[0] != b.shape[0]:
            raise InvalidInputError("weight and bias shapes disagree")
    return MLPParams(weights, biases)
