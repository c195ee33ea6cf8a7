"""Accuracy measures comparing a reconstructed table against the exact one.

Seven measures are computed per joint type and averaged uniformly over
types: mean squared error over all joint actions, the same restricted to the
truly optimal actions, the fraction of truly optimal actions the
reconstruction still considers optimal, greedy value loss (regret), the
value loss of a Boltzmann (softmax) policy over the reconstructed values,
the fraction of correctly ranked actions, and the Kendall tau-b rank
correlation.  Kendall tau-b is undefined for a constant table on either
side; such types report NaN and are skipped when averaging.

An action counts as correctly ranked when the number of actions with a
strictly greater reconstructed value falls inside the window of positions
its exact-value tie class occupies: ties in the exact table give each member
a range of legal positions rather than a single one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .games import DEFAULT_TIE_TOL, QTable, optimal_action_set

METRIC_FIELDS = (
    "mse_all",
    "mse_optimal",
    "optimal_preserved",
    "value_loss",
    "boltzmann_value_loss",
    "correctly_ranked",
    "kendall_tau_b",
)


@dataclass(frozen=True)
class MetricsReport:
    """All accuracy measures for one (game, method, seed) run."""

    mse_all: float
    mse_optimal: float
    optimal_preserved: float
    value_loss: float
    boltzmann_value_loss: float
    correctly_ranked: float
    kendall_tau_b: float
    correctly_ranked_count: float  # raw action count behind the fraction
    per_type: Optional[tuple["MetricsReport", ...]] = None

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_FIELDS} | {
            "correctly_ranked_count": self.correctly_ranked_count
        }


def _check_shapes(q: QTable, q_hat: QTable) -> None:
    if q.values.shape != q_hat.values.shape:
        raise InvalidInputError(
            f"table shapes disagree: {q.values.shape} vs {q_hat.values.shape}"
        )


def mse_all(q: QTable, q_hat: QTable) -> float:
    """Mean squared error over every (type, action) pair."""
    _check_shapes(q, q_hat)
    return float(np.mean((q.values - q_hat.values) ** 2))


def mse_optimal(q: QTable, q_hat: QTable) -> float:
    """Mean squared error restricted to the exactly-optimal actions of each type."""
    _check_shapes(q, q_hat)
    per_type = []
    for t in range(q.n_types):
        best = optimal_action_set(q, t)
        diff = q.values[t, best] - q_hat.values[t, best]
        per_type.append(float(np.mean(diff**2)))
    return float(np.mean(per_type))


def optimal_preserved(q: QTable, q_hat: QTable, tie_tol: float = DEFAULT_TIE_TOL) -> float:
    """Fraction of truly optimal actions also optimal (within tie_tol) in the reconstruction."""
    _check_shapes(q, q_hat)
    per_type = []
    for t in range(q.n_types):
        truly_best = optimal_action_set(q, t)
        approx_best = optimal_action_set(q_hat, t, tol=tie_tol)
        kept = np.isin(truly_best, approx_best).sum()
        per_type.append(kept / truly_best.size)
    return float(np.mean(per_type))


def value_loss(q: QTable, q_hat: QTable) -> float:
    """Regret of acting greedily on the reconstruction (ties -> lowest index)."""
    _check_shapes(q, q_hat)
    per_type = []
    for t in range(q.n_types):
        greedy = int(np.argmax(q_hat.values[t]))
        per_type.append(float(q.values[t].max() - q.values[t, greedy]))
    return float(np.mean(per_type))


def boltzmann_value_loss(q: QTable, q_hat: QTable, temperature: float = 1.0) -> float:
    """Regret of the softmax policy induced by the reconstructed values."""
    _check_shapes(q, q_hat)
    if temperature <= 0.0:
        raise InvalidInputError("temperature must be positive")
    per_type = []
    for t in range(q.n_types):
        logits = q_hat.values[t] / temperature
        weights = np.exp(logits - logits.max())
        policy = weights / weights.sum()
        per_type.append(float(q.values[t].max() - policy @ q.values[t]))
    return float(np.mean(per_type))


def _correct_rank_mask(q_row: np.ndarray, q_hat_row: np.ndarray) -> np.ndarray:
    """Per action: does its reconstructed rank fall inside its true tie-class window?

    The reconstructed rank of an action is the count of actions with strictly
    greater reconstructed value; the window of action ``a`` spans positions
    ``[#(Q > Q[a]), #(Q >= Q[a]) - 1]`` in the exact descending order.
    """
    greater_hat = (q_hat_row[None, :] > q_hat_row[:, None]).sum(axis=1)
    lo = (q_row[None, :] > q_row[:, None]).sum(axis=1)
    hi = (q_row[None, :] >= q_row[:, None]).sum(axis=1) - 1
    return (lo <= greater_hat) & (greater_hat <= hi)


def correctly_ranked(q: QTable, q_hat: QTable) -> float:
    """Fraction of actions whose reconstructed rank is consistent with the exact ranking."""
    _check_shapes(q, q_hat)
    per_type = [
        float(np.mean(_correct_rank_mask(q.values[t], q_hat.values[t])))
        for t in range(q.n_types)
    ]
    return float(np.mean(per_type))


def correctly_ranked_count(q: QTable, q_hat: QTable) -> float:
    """Raw number of correctly ranked actions, averaged over joint types."""
    _check_shapes(q, q_hat)
    per_type = [
        int(_correct_rank_mask(q.values[t], q_hat.values[t]).sum()) for t in range(q.n_types)
    ]
    return float(np.mean(per_type))


def kendall_tau_b(q: QTable, q_hat: QTable) -> float:
    """Kendall tau-b between the reconstructed and exact rankings (NaN if degenerate).

    Over all action pairs: tau_b = (P - D) / sqrt((P + D + Tx) (P + D + Ty))
    with P concordant pairs, D discordant pairs, Tx pairs tied only in the
    exact table and Ty pairs tied only in the reconstruction; pairs tied in
    both count in neither correction term.
    """
    _check_shapes(q, q_hat)
    per_type = [_tau_b_row(q.values[t], q_hat.values[t]) for t in range(q.n_types)]
    finite = [v for v in per_type if not math.isnan(v)]
    if not finite:
        return float("nan")
    return float(np.mean(finite))


def _tau_b_row(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        raise InvalidInputError("tau-b needs at least two actions")
    upper = np.triu_indices(x.size, k=1)
    dx = np.sign(x[:, None] - x[None, :])[upper]
    dy = np.sign(y[:, None] - y[None, :])[upper]
    product = dx * dy
    concordant = int((product > 0).sum())
    discordant = int((product < 0).sum())
    ties_x_only = int(((dx == 0) & (dy != 0)).sum())
    ties_y_only = int(((dx != 0) & (dy == 0)).sum())
    denom = math.sqrt(
        (concordant + discordant + ties_x_only) * (concordant + discordant + ties_y_only)
    )
    if denom == 0.0:
        return float("nan")
    return (concordant - discordant) / denom


def evaluate(
    q: QTable,
    q_hat: QTable,
    temperature: float = 1.0,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> MetricsReport:
    """Assemble the full report; Bayesian tables also get a per-type breakdown."""
    _check_shapes(q, q_hat)
    report = _single_report(q, q_hat, temperature, tie_tol)
    if q.n_types == 1:
        return report
    breakdown = tuple(
        _single_report(
            QTable(q.values[t : t + 1]), QTable(q_hat.values[t : t + 1]), temperature, tie_tol
        )
        for t in range(q.n_types)
    )
    return MetricsReport(
        **{name: getattr(report, name) for name in METRIC_FIELDS},
        correctly_ranked_count=report.correctly_ranked_count,
        per_type=breakdown,
    )


def _single_report(
    q: QTable, q_hat: QTable, temperature: float, tie_tol: float
) -> MetricsReport:
    return MetricsReport(
        mse_all=mse_all(q, q_hat),
        mse_optimal=mse_optimal(q, q_hat),
        optimal_preserved=optimal_preserved(q, q_hat, tie_tol),
        value_loss=value_loss(q, q_hat),
        boltzmann_value_loss=boltzmann_value_loss(q, q_hat, temperature),
        correctly_ranked=correctly_ranked(q, q_hat),
        kendall_tau_b=kendall_tau_b(q, q_hat),
        correctly_ranked_count=correctly_ranked_count(q, q_hat),
    )


# ---------------------------------------------------------------------------
# Serialization and aggregation
# ---------------------------------------------------------------------------

CSV_COLUMNS = METRIC_FIELDS + ("correctly_ranked_count",)


def report_to_csv_row(report: MetricsReport) -> list[str]:
    return [repr(getattr(report, name)) for name in CSV_COLUMNS]


def _null_for_nan(doc: dict) -> dict:
    # Undefined tau-b values must become JSON null, not the bare NaN token.
    return {
        k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in doc.items()
    }


def report_to_json(report: MetricsReport) -> str:
    doc = _null_for_nan(report.as_dict())
    if report.per_type is not None:
        doc["per_type"] = [_null_for_nan(r.as_dict()) for r in report.per_type]
    return json.dumps(doc, sort_keys=True, allow_nan=False)


def mean_and_standard_error(values: list[float]) -> tuple[float, float]:
    """Sample mean and standard error (stdev / sqrt(k)); SE is 0 for a single value.

    NaN entries (undefined tau-b) are excluded; an all-NaN list stays NaN.
    """
    finite = [v for v in values if not math.isnan(v)]
    if not finite:
        return float("nan"), float("nan")
    mean = float(np.mean(finite))
    if len(finite) == 1:
        return mean, 0.0
    stdev = float(np.std(finite, ddof=1))
    return mean, stdev / math.sqrt(len(finite))
