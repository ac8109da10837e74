"""Noisy block-coordinate fixed-point engine.

The engine iterates

    u[k+1, b] = u[k, b] + rho[k, b] * lam_k * (R_b(u_k) + e[k, b] + eta[k+1, b] - u[k, b])

where rho is a random block-activation mask, e an optional error term, and
eta fresh Gaussian noise drawn from a per-(iteration, block) substream so
that schedules and evaluation order cannot perturb noise assignment.
Stochastic gradient and coordinate-descent instantiations are provided.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng
from .blocks import BlockVector
from .errors import ParameterError, StructuralError
from .operators import Contractive, NonExpansive, OperatorHandle

# ---------------------------------------------------------------------------
# Block schedules


class BlockSchedule:
    """Distribution over activation masks rho_k in {0,1}^B."""

    def mask(self, n_blocks: int, seed: int, k: int) -> np.ndarray:
        raise NotImplementedError

    def activation_probability(self, n_blocks: int) -> float:
        """Per-step marginal probability that any given block is active."""
        raise NotImplementedError


@dataclass(frozen=True)
class AllBlocks(BlockSchedule):
    def mask(self, n_blocks, seed, k):
        return np.ones(n_blocks, dtype=bool)

    def activation_probability(self, n_blocks):
        return 1.0


@dataclass(frozen=True)
class BernoulliPerBlock(BlockSchedule):
    """Each block active independently with probability q."""

    q: float

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ParameterError(f"activation probability must be in (0, 1], got {self.q}")

    def mask(self, n_blocks, seed, k):
        return rng.schedule_rng(seed, k).random(n_blocks) < self.q

    def activation_probability(self, n_blocks):
        return self.q


@dataclass(frozen=True)
class SingleUniform(BlockSchedule):
    """Exactly one block, uniform over {1..B}."""

    def mask(self, n_blocks, seed, k):
        m = np.zeros(n_blocks, dtype=bool)
        m[rng.schedule_rng(seed, k).integers(n_blocks)] = True
        return m

    def activation_probability(self, n_blocks):
        return 1.0 / n_blocks


@dataclass(frozen=True)
class SubsetUniform(BlockSchedule):
    """A uniform random subset of m blocks, without replacement."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"subset size must be >= 1, got {self.m}")

    def mask(self, n_blocks, seed, k):
        if self.m > n_blocks:
            raise ParameterError(f"subset size {self.m} exceeds block count {n_blocks}")
        m = np.zeros(n_blocks, dtype=bool)
        m[rng.schedule_rng(seed, k).choice(n_blocks, size=self.m, replace=False)] = True
        return m

    def activation_probability(self, n_blocks):
        return self.m / n_blocks


@dataclass(frozen=True)
class CyclicPermutation(BlockSchedule):
    """One block per step, visiting all blocks once per cycle in a fresh random order."""

    def mask(self, n_blocks, seed, k):
        cycle, pos = divmod(k, n_blocks)
        perm = rng.schedule_rng(seed, cycle, tag=1).permutation(n_blocks)
        m = np.zeros(n_blocks, dtype=bool)
        m[perm[pos]] = True
        return m

    def activation_probability(self, n_blocks):
        return 1.0 / n_blocks


# ---------------------------------------------------------------------------
# Configuration and trace


@dataclass(frozen=True)
class IterationConfig:
    """Parameters of one noisy fixed-point run.

    ``lam`` is either a constant step size in (0, 1] or a per-iteration
    sequence; ``sigma`` the privacy noise standard deviation; ``K`` the
    iteration count; ``error_injector`` an optional map ``(u, k) -> e_k``
    (same shape as u, defaults to zero); ``seed`` drives every random
    draw through counter-based substreams.
    """

    K: int
    sigma: float = 0.0
    lam: float | Sequence[float] = 1.0
    schedule: BlockSchedule = AllBlocks()
    error_injector: Callable[[np.ndarray, int], np.ndarray] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError(f"iteration count must be >= 1, got {self.K}")
        if self.sigma < 0:
            raise ParameterError(f"noise std must be >= 0, got {self.sigma}")
        lams = [self.lam] if np.isscalar(self.lam) else list(self.lam)
        if not np.isscalar(self.lam) and len(lams) < self.K:
            raise ParameterError(
                f"step-size schedule has {len(lams)} entries for K={self.K}")
        for l in lams:
            if not 0.0 < l <= 1.0:
                raise ParameterError(f"step size must lie in (0, 1], got {l}")

    def step_size(self, k: int) -> float:
        if np.isscalar(self.lam):
            return float(self.lam)
        return float(self.lam[k])


@dataclass
class RunTrace:
    """Per-iteration record of a run (append-only while running).

    ``active`` stores each iteration's activation mask, which together
    with the seed pins every noise substream used (block b at iteration k
    reads stream (seed, k, b)), so a trace is sufficient to replay draws.
    """

    seed: int
    iterations: list[int] = field(default_factory=list)
    active: list[np.ndarray] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    dist_sq: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)

    def record(self, k, mask, obj=None, dist=None, iterate=None):
        self.iterations.append(k)
        self.active.append(np.asarray(mask, dtype=bool).copy())
        if obj is not None:
            self.objective.append(float(obj))
        if dist is not None:
            self.dist_sq.append(float(dist))
        if iterate is not None:
            self.iterates.append(np.array(iterate, copy=True))

    def __len__(self):
        return len(self.iterations)

    def total_noise_draws(self, block_dim: int, sigma: float) -> int:
        """Total Gaussian draws of the run: sum over k of |active| * p (0 if sigma == 0)."""
        if sigma == 0.0:
            return 0
        return int(sum(m.sum() for m in self.active)) * block_dim


# ---------------------------------------------------------------------------
# Engine


def step(u: BlockVector, operator: OperatorHandle, cfg: IterationConfig, k: int) -> BlockVector:
    """One noisy block-coordinate update; inactive blocks are returned bit-unchanged."""
    if k < 0 or k >= cfg.K:
        raise ParameterError(f"iteration index {k} out of range for K={cfg.K}")
    mask = cfg.schedule.mask(u.n_blocks, cfg.seed, k)
    return _masked_update(u, operator, cfg, k, mask)[0]


def _masked_update(u, operator, cfg, k, mask):
    lam = cfg.step_size(k)
    target = np.asarray(operator.apply(u.flat, k), dtype=float)
    if target.shape != u.flat.shape:
        raise StructuralError(
            f"operator returned shape {target.shape}, expected {u.flat.shape}")
    target = target.reshape(u.data.shape)
    if cfg.error_injector is not None:
        err = np.asarray(cfg.error_injector(u.flat, k), dtype=float).reshape(u.data.shape)
        target = target + err
    new = u.data.copy()
    for b in np.flatnonzero(mask):
        eta = rng.gaussian_block(cfg.seed, k, int(b), cfg.sigma, u.block_dim)
        new[b] = u.data[b] + lam * (target[b] + eta - u.data[b])
    return BlockVector(new), mask


def run(u0: BlockVector, operator: OperatorHandle, cfg: IterationConfig,
        objective: Callable[[np.ndarray], float] | None = None,
        reference: np.ndarray | None = None,
        record_iterates: bool = False) -> tuple[BlockVector, RunTrace]:
    """Apply ``step`` K times; bit-identical traces for identical seeds.

    Parameters
    ----------
    u0 : BlockVector
        Initial point.
    operator : OperatorHandle
        The (possibly iteration-dependent) map applied at every step.
    cfg : IterationConfig
        Step sizes, noise level, schedule, and seed.
    objective : callable, optional
        Evaluated on the flat iterate after each step and recorded.
    reference : array, optional
        Squared distance to this point is recorded after each step.
    record_iterates : bool
        Store full iterate snapshots (off by default; memory).
    """
    u = u0.copy()
    trace = RunTrace(seed=cfg.seed)
    for k in range(cfg.K):
        mask = cfg.schedule.mask(u.n_blocks, cfg.seed, k)
        u, _ = _masked_update(u, operator, cfg, k, mask)
        trace.record(
            k, mask,
            obj=None if objective is None else objective(u.flat),
            dist=None if reference is None else float(np.sum((u.flat - np.asarray(reference).ravel()) ** 2)),
            iterate=u.flat if record_iterates else None,
        )
    return u, trace


# ---------------------------------------------------------------------------
# Gradient-method instantiations


def dpsgd_instance(item_grads: Sequence[Callable[[np.ndarray], np.ndarray]],
                   beta: float, gamma: float, sigma_grad: float, K: int, seed: int,
                   order: str | Sequence[int] = "cyclic") -> tuple[OperatorHandle, IterationConfig]:
    """Single-block instantiation reproducing noisy proximal-free SGD.

    Running the engine with the returned pair performs
    ``u <- u - gamma * (grad_i(u) + eta')`` with one item gradient per step
    and gradient noise eta' of standard deviation ``sigma_grad``. The
    engine realizes this with step size ``lam = gamma*beta/2`` and internal
    noise std ``2*sigma_grad/beta``; the stochastic-gradient error term is
    folded into the operator by evaluating it on the scheduled item.

    ``order`` selects items: "cyclic" passes, "uniform" draws, or an
    explicit index sequence.
    """
    if beta <= 0:
        raise ParameterError(f"smoothness beta must be > 0, got {beta}")
    if not 0.0 < gamma < 2.0 / beta:
        raise ParameterError(f"step gamma must lie in (0, 2/beta), got {gamma}")
    if sigma_grad < 0:
        raise ParameterError(f"gradient noise std must be >= 0, got {sigma_grad}")
    n_items = len(item_grads)

    def item_at(k: int) -> int:
        if isinstance(order, str):
            if order == "cyclic":
                return k % n_items
            if order == "uniform":
                return int(rng.schedule_rng(seed, k, tag=2).integers(n_items))
            raise ParameterError(f"unknown item order {order!r}")
        return int(order[k % len(order)])

    def apply(u, k=0):
        u = np.asarray(u, dtype=float)
        return u - (2.0 / beta) * np.asarray(item_grads[item_at(k)](u), dtype=float)

    handle = OperatorHandle(apply=apply, kind=NonExpansive(), data_dependent=True)
    cfg = IterationConfig(K=K, sigma=2.0 * sigma_grad / beta, lam=gamma * beta / 2.0,
                          schedule=AllBlocks(), seed=seed)
    return handle, cfg


def dpcd_instance(coord_grads: Sequence[Callable[[np.ndarray], np.ndarray]],
                  beta: float, n_blocks: int, block_dim: int, sigma: float, K: int,
                  seed: int, schedule: BlockSchedule | None = None,
                  tau: float | None = None) -> tuple[OperatorHandle, IterationConfig]:
    """Block-coordinate instantiation: block b applies u_b - (2/beta) * grad_b(u).

    ``coord_grads[b]`` maps the full flat iterate to the gradient of block b.
    The default schedule activates a single uniform block per step.
    """
    if beta <= 0:
        raise ParameterError(f"smoothness beta must be > 0, got {beta}")
    if n_blocks <= 1:
        raise ParameterError(f"coordinate instantiation needs more than one block, got {n_blocks}")
    if len(coord_grads) != n_blocks:
        raise StructuralError(
            f"{len(coord_grads)} block gradients supplied for {n_blocks} blocks")

    def apply(u, k=0):
        u = np.asarray(u, dtype=float).reshape(n_blocks, block_dim)
        out = np.empty_like(u)
        for b in range(n_blocks):
            out[b] = u[b] - (2.0 / beta) * np.asarray(coord_grads[b](u.ravel()), dtype=float)
        return out.ravel()

    kind = Contractive(tau) if tau is not None else NonExpansive()
    handle = OperatorHandle(apply=apply, kind=kind, data_dependent=True)
    cfg = IterationConfig(K=K, sigma=sigma, lam=1.0,
                          schedule=schedule or SingleUniform(), seed=seed)
    return handle, cfg
