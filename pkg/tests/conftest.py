"""Shared fixtures and independent oracle implementations.

The oracles here deliberately re-derive every quantity with a different
algorithm (plain Python loops, closed formulas, explicit position sets) so
they stay independent of the vectorised package code they check.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import pytest

from factoredq.games import GameSpec, firefighting_houses


# ---------------------------------------------------------------------------
# Naive reward evaluators (direct transcriptions of the game rules)
# ---------------------------------------------------------------------------


def naive_reward(spec: GameSpec, a: Sequence[int], theta: Sequence[int] | None = None) -> float:
    name = spec.game_id.value
    n = spec.n
    counts = [sum(1 for x in a if x == v) for v in range(spec.actions_per_agent)]
    if name == "dispersion":
        return n - max(counts[0], counts[1])
    if name == "sparse_dispersion":
        return n / 2 if counts[0] == counts[1] else 0
    if name == "platonia":
        return n if counts[0] == 1 else 0
    if name == "climb":
        if counts[0] == n:
            return n
        if counts[0] == 0:
            return n / 2
        return 0
    if name == "penalty":
        if counts[0] == n or counts[2] == n:
            return n
        if counts[1] == n:
            return n / 2
        if counts[1] == 0:
            return -n
        return 0
    if name == "generalized_firefighting":
        assert theta is not None
        total = 0.0
        for house in range(spec.params.n_houses):
            crew = [i for i in range(n) if firefighting_houses(i)[a[i]] == house]
            if theta[house] and crew:
                total += spec.params.q1 if len(crew) == 1 else spec.params.q2
        return total
    if name == "aloha":
        total = 0.0
        for island in range(n):
            if a[island] != 0:
                continue
            if any(a[neigh] == 0 for neigh in spec.params.adjacency[island]):
                total += spec.params.q2
            else:
                total += spec.params.q1
        return total
    raise AssertionError(name)


# ---------------------------------------------------------------------------
# Naive metric implementations
# ---------------------------------------------------------------------------


def naive_kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    concordant = discordant = ties_x = ties_y = 0
    n = len(x)
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + ties_x) * (concordant + discordant + ties_y)
    )
    if denom == 0:
        return float("nan")
    return (concordant - discordant) / denom


def naive_correctly_ranked(q: Sequence[float], q_hat: Sequence[float]) -> float:
    n = len(q)
    # Descending order positions each true tie class occupies.
    order = sorted(range(n), key=lambda i: -q[i])
    position_of = {}
    for pos, idx in enumerate(order):
        position_of.setdefault(q[idx], []).append(pos)
    correct = 0
    for i in range(n):
        rank_hat = sum(1 for j in range(n) if q_hat[j] > q_hat[i])
        positions = position_of[q[i]]
        if min(positions) <= rank_hat <= max(positions):
            correct += 1
    return correct / n


def naive_boltzmann_loss(q: Sequence[float], q_hat: Sequence[float], temperature: float) -> float:
    weights = [math.exp(v / temperature) for v in q_hat]
    total = sum(weights)
    expected = sum(w / total * qv for w, qv in zip(weights, q))
    return max(q) - expected


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
