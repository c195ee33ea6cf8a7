"""Cooperative one-shot games with exact, enumerable reward oracles.

Seven games are provided.  Five are symmetric "count" games whose reward
depends only on how many agents picked each local action (Dispersion,
SparseDispersion, Platonia, Climb, Penalty).  Two decompose additively over a
graph structure: GeneralizedFirefighting (a Bayesian game where each agent
privately observes the fire state of the two houses it can reach) and Aloha
(islands on a 2-row grid whose radio transmissions interfere with their
neighbours').

Action encodings
----------------
* Dispersion / SparseDispersion: two anonymous local actions ``0`` / ``1``.
* Platonia and Aloha: action ``0`` = send, action ``1`` = idle.
* Climb / Penalty: three local actions ``0`` (high/coordination), ``1``
  (safe), ``2`` (Penalty's second coordination action).
* GeneralizedFirefighting: agent ``i`` reaches houses ``i`` and ``i + 1``;
  action ``a`` means "fight the fire at house ``i + a``".

Joint actions are indexed in lexicographic (mixed-radix) order with agent 0
as the most significant digit; joint types for the Bayesian game are indexed
the same way with house 0 as the most significant bit.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError

# Absolute tolerance used when extracting the greedy set of a *learned* table,
# whose float entries are never exactly tied.  Exact tables use tol=0.
DEFAULT_TIE_TOL = 1e-6


class GameId(str, Enum):
    DISPERSION = "dispersion"
    SPARSE_DISPERSION = "sparse_dispersion"
    PLATONIA = "platonia"
    CLIMB = "climb"
    PENALTY = "penalty"
    FIREFIGHTING = "generalized_firefighting"
    ALOHA = "aloha"


@dataclass(frozen=True)
class GameParams:
    """Game-specific constants; unused fields keep their neutral defaults."""

    q1: float = 0.0
    q2: float = 0.0
    n_houses: int = 0
    n_observed: int = 0
    n_fight: int = 0
    adjacency: tuple[tuple[int, ...], ...] = ()


@dataclass(frozen=True)
class GameSpec:
    """Identity and parameters of one cooperative one-shot game."""

    game_id: GameId
    n: int
    actions_per_agent: int
    bayesian: bool = False
    type_space_size: int = 1
    params: GameParams = field(default_factory=GameParams)

    def __post_init__(self) -> None:
        if self.n <= 0 or self.actions_per_agent <= 0:
            raise ConfigurationError("agent count and action count must be positive")
        if self.bayesian != (self.type_space_size > 1):
            raise ConfigurationError("type_space_size must exceed 1 exactly for Bayesian games")

    @property
    def num_joint_actions(self) -> int:
        return self.actions_per_agent**self.n


@dataclass(frozen=True, eq=False)
class QTable:
    """Dense joint-action value table, shape (type_space_size, num_joint_actions)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidInputError("QTable values must be 2-D (types x joint actions)")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("QTable entries must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_types(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]


def aloha_adjacency(n: int) -> tuple[tuple[int, ...], ...]:
    """Neighbour lists for n islands on a 2 x (n/2) grid.

    Islands are numbered row-major: 0..n/2-1 on the top row, the rest on the
    bottom row.  Neighbours are the horizontal (same-row) islands and the
    single facing island in the other row; corner islands therefore have one
    fewer side neighbour.
    """
    if n < 2 or n % 2 != 0:
        raise ConfigurationError("aloha needs an even number of islands >= 2")
    cols = n // 2
    neighbours: list[tuple[int, ...]] = []
    for island in range(n):
        row, col = divmod(island, cols)
        near = []
        if col > 0:
            near.append(row * cols + col - 1)
        if col < cols - 1:
            near.append(row * cols + col + 1)
        near.append((1 - row) * cols + col)
        neighbours.append(tuple(sorted(near)))
    return tuple(neighbours)


def firefighting_houses(agent: int) -> tuple[int, int]:
    """Houses reachable by an agent: the line topology puts agent i at houses (i, i+1)."""
    return (agent, agent + 1)


def make_game(game_id: GameId | str, n: int | None = None, **overrides) -> GameSpec:
    """Build a GameSpec with the benchmark defaults (n=6 for every game).

    ``overrides`` may adjust game constants (``q1``, ``q2``).  House count for
    the firefighting game is fixed at n+1 by the line topology; Aloha's
    adjacency is fixed by the 2-row grid.
    """
    gid = GameId(game_id)
    if n is None:
        n = 6
    if gid not in (GameId.FIREFIGHTING, GameId.ALOHA) and overrides:
        raise ConfigurationError(f"{gid.value} takes no parameter overrides")
    if gid in (GameId.DISPERSION, GameId.PLATONIA):
        return GameSpec(gid, n, 2)
    if gid is GameId.SPARSE_DISPERSION:
        if n % 2 != 0:
            raise ConfigurationError("sparse dispersion needs an even agent count")
        return GameSpec(gid, n, 2)
    if gid in (GameId.CLIMB, GameId.PENALTY):
        return GameSpec(gid, n, 3)
    if gid is GameId.FIREFIGHTING:
        n_houses = n + 1
        params = GameParams(
            q1=float(overrides.pop("q1", 2.0)),
            q2=float(overrides.pop("q2", 3.0)),
            n_houses=n_houses,
            n_observed=2,
            n_fight=2,
        )
        if overrides:
            raise ConfigurationError(f"unknown overrides: {sorted(overrides)}")
        if not params.q2 < 2 * params.q1:
            raise ConfigurationError("firefighting requires q2 < 2*q1 (sub-additive house reward)")
        return GameSpec(gid, n, 2, bayesian=True, type_space_size=2**n_houses, params=params)
    if gid is GameId.ALOHA:
        params = GameParams(
            q1=float(overrides.pop("q1", 2.0)),
            q2=float(overrides.pop("q2", -1.0)),
            adjacency=aloha_adjacency(n),
        )
        if overrides:
            raise ConfigurationError(f"unknown overrides: {sorted(overrides)}")
        return GameSpec(gid, n, 2, params=params)
    raise ConfigurationError(f"unknown game id: {game_id!r}")


def all_games(n: int | None = None) -> list[GameSpec]:
    """The full benchmark suite of all seven games."""
    return [make_game(gid, n) for gid in GameId]


# ---------------------------------------------------------------------------
# Joint action / joint type enumeration (mixed radix, first index significant)
# ---------------------------------------------------------------------------


def joint_action_index(spec: GameSpec, a: Sequence[int]) -> int:
    _check_action(spec, a)
    idx = 0
    for ai in a:
        idx = idx * spec.actions_per_agent + int(ai)
    return idx


def joint_action_from_index(spec: GameSpec, index: int) -> tuple[int, ...]:
    if not 0 <= index < spec.num_joint_actions:
        raise InvalidInputError(f"joint action index {index} out of range")
    digits = []
    for _ in range(spec.n):
        digits.append(index % spec.actions_per_agent)
        index //= spec.actions_per_agent
    return tuple(reversed(digits))


def enumerate_joint_actions(spec: GameSpec) -> list[tuple[int, ...]]:
    """All joint actions in lexicographic order (agent 0 most significant)."""
    return list(itertools.product(range(spec.actions_per_agent), repeat=spec.n))


def type_index(spec: GameSpec, theta: Sequence[int]) -> int:
    _check_type(spec, theta)
    idx = 0
    for bit in theta:
        idx = idx * 2 + int(bit)
    return idx


def type_from_index(spec: GameSpec, index: int) -> tuple[int, ...]:
    if not spec.bayesian:
        raise InvalidInputError("joint types exist only for Bayesian games")
    n_houses = spec.params.n_houses
    if not 0 <= index < spec.type_space_size:
        raise InvalidInputError(f"type index {index} out of range")
    bits = []
    for _ in range(n_houses):
        bits.append(index % 2)
        index //= 2
    return tuple(reversed(bits))


def enumerate_joint_types(spec: GameSpec) -> list[tuple[int, ...]]:
    if not spec.bayesian:
        return [()]
    return list(itertools.product((0, 1), repeat=spec.params.n_houses))


# ---------------------------------------------------------------------------
# Reward oracles
# ---------------------------------------------------------------------------


def _check_action(spec: GameSpec, a: Sequence[int]) -> None:
    if len(a) != spec.n:
        raise InvalidInputError(f"joint action has {len(a)} entries, expected {spec.n}")
    for ai in a:
        if not 0 <= int(ai) < spec.actions_per_agent:
            raise InvalidInputError(f"local action {ai} outside [0, {spec.actions_per_agent})")


def _check_type(spec: GameSpec, theta: Sequence[int]) -> None:
    if not spec.bayesian:
        raise InvalidInputError("this game has no joint types")
    if len(theta) != spec.params.n_houses:
        raise InvalidInputError(
            f"joint type has {len(theta)} entries, expected {spec.params.n_houses}"
        )
    for bit in theta:
        if int(bit) not in (0, 1):
            raise InvalidInputError("type entries must be 0 (intact) or 1 (burning)")


def evaluate_reward(
    spec: GameSpec, a: Sequence[int], theta: Optional[Sequence[int]] = None
) -> float:
    """Exact shared reward of a joint action (and joint type, when Bayesian)."""
    _check_action(spec, a)
    if spec.bayesian:
        if theta is None:
            raise InvalidInputError("this game requires a joint type")
        _check_type(spec, theta)
    elif theta is not None:
        raise InvalidInputError("this game does not take a joint type")

    n = spec.n
    gid = spec.game_id
    if gid is GameId.DISPERSION:
        ones = sum(1 for ai in a if ai == 1)
        return float(n - max(ones, n - ones))
    if gid is GameId.SPARSE_DISPERSION:
        ones = sum(1 for ai in a if ai == 1)
        return float(n // 2) if ones * 2 == n else 0.0
    if gid is GameId.PLATONIA:
        senders = sum(1 for ai in a if ai == 0)
        return float(n) if senders == 1 else 0.0
    if gid is GameId.CLIMB:
        k0 = sum(1 for ai in a if ai == 0)
        if k0 == n:
            return float(n)
        if k0 > 0:
            return 0.0
        return n / 2
    if gid is GameId.PENALTY:
        k0 = sum(1 for ai in a if ai == 0)
        k1 = sum(1 for ai in a if ai == 1)
        k2 = n - k0 - k1
        if k0 == n or k2 == n:
            return float(n)
        if k1 == n:
            return n / 2
        if k1 > 0:
            return 0.0
        return float(-n)
    if gid is GameId.FIREFIGHTING:
        assert theta is not None
        fighters = [0] * spec.params.n_houses
        for agent, ai in enumerate(a):
            fighters[agent + int(ai)] += 1
        total = 0.0
        for house, burning in enumerate(theta):
            if not burning or fighters[house] == 0:
                continue
            total += spec.params.q1 if fighters[house] == 1 else spec.params.q2
        return total
    if gid is GameId.ALOHA:
        total = 0.0
        for island, ai in enumerate(a):
            if ai != 0:  # idle islands contribute nothing
                continue
            interfered = any(a[other] == 0 for other in spec.params.adjacency[island])
            total += spec.params.q2 if interfered else spec.params.q1
        return total
    raise ConfigurationError(f"unknown game id: {gid!r}")


@lru_cache(maxsize=None)
def true_q_table(spec: GameSpec) -> QTable:
    """Exact Q table over every (joint type, joint action) pair."""
    actions = enumerate_joint_actions(spec)
    if spec.bayesian:
        types = enumerate_joint_types(spec)
        values = np.empty((len(types), len(actions)))
        for t, theta in enumerate(types):
            for j, a in enumerate(actions):
                values[t, j] = evaluate_reward(spec, a, theta)
    else:
        values = np.empty((1, len(actions)))
        for j, a in enumerate(actions):
            values[0, j] = evaluate_reward(spec, a)
    return QTable(values)


def optimal_action_set(q: QTable, type_idx: int = 0, tol: float = 0.0) -> np.ndarray:
    """Indices of the maximising joint actions for one joint type.

    ``tol`` widens the tie test to ``max - tol`` for learned tables; exact
    tables should keep the default strict equality.
    """
    row = q.values[type_idx]
    if row.size == 0:
        raise InvalidInputError("empty value table")
    best = row.max()
    if tol <= 0.0:
        mask = row == best
    else:
        mask = row >= best - tol
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def game_to_json(spec: GameSpec) -> str:
    doc = {
        "game_id": spec.game_id.value,
        "n": spec.n,
        "actions_per_agent": spec.actions_per_agent,
        "bayesian": spec.bayesian,
        "type_space_size": spec.type_space_size,
        "params": {
            "q1": spec.params.q1,
            "q2": spec.params.q2,
            "n_houses": spec.params.n_houses,
            "n_observed": spec.params.n_observed,
            "n_fight": spec.params.n_fight,
            "adjacency": [list(row) for row in spec.params.adjacency],
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def game_from_json(text: str) -> GameSpec:
    doc = json.loads(text)
    params = doc.get("params", {})
    adjacency = tuple(tuple(int(x) for x in row) for row in params.get("adjacency", []))
    spec = GameSpec(
        game_id=GameId(doc["game_id"]),
        n=int(doc["n"]),
        actions_per_agent=int(doc["actions_per_agent"]),
        bayesian=bool(doc.get("bayesian", False)),
        type_space_size=int(doc.get("type_space_size", 1)),
        params=GameParams(
            q1=float(params.get("q1", 0.0)),
            q2=float(params.get("q2", 0.0)),
            n_houses=int(params.get("n_houses", 0)),
            n_observed=int(params.get("n_observed", 0)),
            n_fight=int(params.get("n_fight", 0)),
            adjacency=adjacency,
        ),
    )
    # Re-derive a reference spec to catch tampered documents for known games.
    reference = make_game(spec.game_id, spec.n, q1=spec.params.q1, q2=spec.params.q2) \
        if spec.game_id in (GameId.FIREFIGHTING, GameId.ALOHA) else make_game(spec.game_id, spec.n)
    if reference != spec:
        raise InvalidInputError("game document is inconsistent with its game id")
    return spec
