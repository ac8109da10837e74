"""Shared independent oracles for the test suite."""

import numpy as np

from privfp.admm import AdmmState, ConsensusProblem, u_update, x_update, z_update
from privfp.blocks import BlockVector
from privfp.operators import CustomProx, ZeroProx, prox_l1


def one_round_u(problem: ConsensusProblem, U: np.ndarray, lam: float) -> np.ndarray:
    """One noiseless centralized round built from the elementary updates."""
    state = AdmmState(u=BlockVector(U.copy()), z=np.zeros(U.shape[1]))
    z = z_update(state, problem)
    out = np.empty_like(U)
    for i in range(problem.n):
        x_i = x_update(i, z, state, problem)
        out[i] = u_update(i, x_i, z, state, lam, np.zeros(U.shape[1]), problem)
    return out


def absolute_loss_prox(d: float, level: float) -> CustomProx:
    """Prox of level * |x - d| (translation of the soft threshold)."""
    return CustomProx(fn=lambda v, d=d, t=level: d + prox_l1(v - d, t))


def consensus_displacement_audit(n: int, L: float, gamma: float, lam: float,
                                 trials: int, seed: int) -> float:
    """Worst one-round displacement between neighboring datasets, 1-D losses.

    Per-item losses are the record-level (1/n)-weighted L-Lipschitz
    absolute losses, so each per-item prox soft-thresholds at
    gamma * L / n. Returns the largest measured ||T(u) - T'(u)|| over
    random states and neighboring item values.
    """
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        data = gen.normal(size=n) * gen.uniform(0.5, 3.0)
        j = int(gen.integers(n))
        data_prime = data.copy()
        data_prime[j] = gen.normal() * gen.uniform(0.5, 3.0)
        level = gamma * L / n
        make = lambda vals: ConsensusProblem(
            prox_f=tuple(absolute_loss_prox(float(d), level) for d in vals),
            prox_r=ZeroProx(), gamma=gamma, lipschitz=L)
        U = gen.normal(size=(n, 1)) * gen.uniform(0.2, 5.0)
        out = one_round_u(make(data), U, lam)
        out_prime = one_round_u(make(data_prime), U, lam)
        worst = max(worst, float(np.linalg.norm(out - out_prime)))
    return worst
