"""Scheduling and topology simulation for multi-user runs.

Uniform user subsampling for federated rounds, the uniform random walk
over the complete graph for decentralized runs, and per-user observation
logs recording what each user sees (the basis of the network-privacy
view). The walk interface is a single "draw the next user" call so other
topologies can slot in later without touching the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def sample_users(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform subset of m of n user indices, without replacement (sorted)."""
    if n < 1:
        raise ParameterError(f"population must be >= 1, got {n}")
    if not 1 <= m <= n:
        raise ParameterError(f"cohort size must satisfy 1 <= m <= n, got m={m}, n={n}")
    return np.sort(rng.choice(n, size=m, replace=False))


def walk_next(n: int, rng: np.random.Generator) -> int:
    """Next walk target, uniform over all n users (self-loops allowed)."""
    if n < 1:
        raise ParameterError(f"population must be >= 1, got {n}")
    return int(rng.integers(n))


@dataclass
class ObservationLog:
    """Per-user sequences of (global step, model snapshot) at participation times."""

    n: int
    events: dict[int, list[tuple[int, np.ndarray]]] = field(default_factory=dict)

    def sequence(self, user: int) -> list[tuple[int, np.ndarray]]:
        return self.events.get(user, [])

    def total_events(self) -> int:
        return sum(len(v) for v in self.events.values())


def record_observation(log: ObservationLog, user: int, k: int, z: np.ndarray) -> ObservationLog:
    """Append (k, copy of z) to one user's sequence; other users' logs are untouched."""
    if not 0 <= user < log.n:
        raise ParameterError(f"user index {user} out of range [0, {log.n})")
    log.events.setdefault(user, []).append((k, np.array(z, copy=True)))
    return log


def participation_counts(log: ObservationLog) -> np.ndarray:
    """Per-user participation counts K_i; their sum is the total step count."""
    counts = np.zeros(log.n, dtype=int)
    for user, seq in log.events.items():
        counts[user] = len(seq)
    return counts
