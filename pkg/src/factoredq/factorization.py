"""Coordination-graph factorizations: which agent subsets share a network.

A factorization is a set of factors (agent subsets); each factor later owns
one function approximator over its local joint action space.  Five schemes
are supported: one singleton factor per agent, a random partition into
equal-size factors, a random set of (possibly overlapping) distinct factors
covering every agent, the complete set of all size-f subsets, and the single
all-agents factor of a joint learner.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError

# Rejection-sampling budget for covering overlapping factor draws.
MAX_OVERLAP_ATTEMPTS = 10_000


class Scheme(str, Enum):
    SINGLE_AGENT = "single_agent"
    RANDOM_PARTITION = "random_partition"
    OVERLAPPING = "overlapping"
    COMPLETE = "complete"
    JOINT = "joint"


@dataclass(frozen=True)
class Factor:
    """An ordered subset of agents sharing one local value function."""

    agents: tuple[int, ...]
    num_actions: int  # per-agent local action count

    def __post_init__(self) -> None:
        agents = tuple(int(i) for i in self.agents)
        object.__setattr__(self, "agents", agents)
        if not agents:
            raise ConfigurationError("a factor needs at least one agent")
        if any(b <= a for a, b in zip(agents, agents[1:])):
            raise ConfigurationError("factor agents must be strictly increasing")
        if agents[0] < 0:
            raise ConfigurationError("agent indices must be non-negative")
        if self.num_actions <= 0:
            raise ConfigurationError("num_actions must be positive")

    @property
    def size(self) -> int:
        return len(self.agents)

    @property
    def local_action_space(self) -> int:
        return self.num_actions ** len(self.agents)


@dataclass(frozen=True)
class Factorization:
    """A canonical (lexicographically sorted) collection of factors."""

    scheme: Scheme
    n: int
    f: int
    factors: tuple[Factor, ...]
    rng_seed: Optional[int] = None

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.factors, key=lambda fc: fc.agents))
        object.__setattr__(self, "factors", ordered)
        self.validate()

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    def validate(self) -> None:
        if not self.factors:
            raise ConfigurationError("a factorization needs at least one factor")
        covered: set[int] = set()
        seen: set[tuple[int, ...]] = set()
        for factor in self.factors:
            if factor.agents in seen:
                raise ConfigurationError(f"duplicate factor {factor.agents}")
            seen.add(factor.agents)
            if factor.agents[-1] >= self.n:
                raise ConfigurationError(f"factor {factor.agents} exceeds agent range")
            covered.update(factor.agents)
        if covered != set(range(self.n)):
            raise ConfigurationError("every agent must appear in at least one factor")

        scheme, n, f = self.scheme, self.n, self.f
        sizes = [factor.size for factor in self.factors]
        if scheme is Scheme.SINGLE_AGENT:
            if self.num_factors != n or any(s != 1 for s in sizes):
                raise ConfigurationError("single-agent scheme needs n singleton factors")
        elif scheme is Scheme.RANDOM_PARTITION:
            if any(s != f for s in sizes):
                raise ConfigurationError("partition factors must all have size f")
            if sum(sizes) != n:
                raise ConfigurationError("partition factors must be disjoint and cover all agents")
        elif scheme is Scheme.OVERLAPPING:
            if any(s != f for s in sizes):
                raise ConfigurationError("overlapping factors must all have size f")
        elif scheme is Scheme.COMPLETE:
            if any(s != f for s in sizes):
                raise ConfigurationError("complete factors must all have size f")
            if self.num_factors != comb(n, f):
                raise ConfigurationError("complete scheme must contain every size-f subset")
        elif scheme is Scheme.JOINT:
            if self.num_factors != 1 or sizes[0] != n:
                raise ConfigurationError("joint scheme is a single factor of all agents")


def build_factorization(
    scheme: Scheme | str,
    n: int,
    actions_per_agent: int,
    f: int = 2,
    num_factors: Optional[int] = None,
    rng_seed: Optional[int] = None,
) -> Factorization:
    """Construct a factorization for ``n`` agents.

    ``f`` is the factor size for the partition / overlapping / complete
    schemes (restricted to 2 or 3); ``num_factors`` is the requested count for
    the overlapping scheme (default 6).  Random schemes are deterministic
    functions of ``rng_seed``.
    """
    scheme = Scheme(scheme)
    if n <= 0:
        raise ConfigurationError("n must be positive")

    if scheme is Scheme.SINGLE_AGENT:
        factors = tuple(Factor((i,), actions_per_agent) for i in range(n))
        return Factorization(scheme, n, 1, factors, rng_seed)

    if scheme is Scheme.JOINT:
        return Factorization(scheme, n, n, (Factor(tuple(range(n)), actions_per_agent),), rng_seed)

    if f not in (2, 3):
        raise ConfigurationError(f"factor size must be 2 or 3, got {f}")
    if f > n:
        raise ConfigurationError("factor size cannot exceed the agent count")

    if scheme is Scheme.COMPLETE:
        factors = tuple(
            Factor(subset, actions_per_agent) for subset in itertools.combinations(range(n), f)
        )
        return Factorization(scheme, n, f, factors, rng_seed)

    rng = np.random.default_rng(rng_seed)

    if scheme is Scheme.RANDOM_PARTITION:
        if n % f != 0:
            raise ConfigurationError(f"partition needs f | n, got f={f}, n={n}")
        perm = [int(i) for i in rng.permutation(n)]
        factors = tuple(
            Factor(tuple(sorted(perm[i : i + f])), actions_per_agent) for i in range(0, n, f)
        )
        return Factorization(scheme, n, f, factors, rng_seed)

    if scheme is Scheme.OVERLAPPING:
        count = 6 if num_factors is None else num_factors
        all_subsets = list(itertools.combinations(range(n), f))
        if count > len(all_subsets):
            raise ConfigurationError(
                f"cannot draw {count} distinct factors from {len(all_subsets)} subsets"
            )
        if count * f < n:
            raise ConfigurationError(
                f"{count} factors of size {f} cannot cover {n} agents"
            )
        for _ in range(MAX_OVERLAP_ATTEMPTS):
            picks = rng.choice(len(all_subsets), size=count, replace=False)
            chosen = [all_subsets[int(i)] for i in picks]
            if len({agent for subset in chosen for agent in subset}) == n:
                factors = tuple(Factor(subset, actions_per_agent) for subset in chosen)
                return Factorization(scheme, n, f, factors, rng_seed)
        raise ConfigurationError(
            f"no covering draw of {count} overlapping factors found in "
            f"{MAX_OVERLAP_ATTEMPTS} attempts"
        )

    raise ConfigurationError(f"unknown scheme: {scheme!r}")


def local_action_of(factor: Factor, a: Sequence[int]) -> int:
    """Mixed-radix index of the factor members' actions (first member most significant)."""
    if factor.agents[-1] >= len(a):
        raise InvalidInputError("joint action too short for this factor")
    idx = 0
    for agent in factor.agents:
        ai = int(a[agent])
        if not 0 <= ai < factor.num_actions:
            raise InvalidInputError(f"local action {ai} outside [0, {factor.num_actions})")
        idx = idx * factor.num_actions + ai
    return idx


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def factorization_to_json(factorization: Factorization) -> str:
    doc = {
        "scheme": factorization.scheme.value,
        "n": factorization.n,
        "f": factorization.f,
        "num_factors": factorization.num_factors,
        "num_actions": factorization.factors[0].num_actions,
        "seed": factorization.rng_seed,
        "factors": [list(factor.agents) for factor in factorization.factors],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def factorization_from_json(text: str) -> Factorization:
    doc = json.loads(text)
    num_actions = int(doc["num_actions"])
    factors = tuple(
        Factor(tuple(int(i) for i in agents), num_actions) for agents in doc["factors"]
    )
    factorization = Factorization(
        scheme=Scheme(doc["scheme"]),
        n=int(doc["n"]),
        f=int(doc["f"]),
        factors=factors,
        rng_seed=None if doc.get("seed") is None else int(doc["seed"]),
    )
    if factorization.num_factors != int(doc["num_factors"]):
        raise ConfigurationError("factor count disagrees with document header")
    return factorization
