"""Proximal, reflection, gradient-step, and reflect-compose operators.

Operators act on flat numpy vectors and carry a declared expansiveness
class (never inferred at runtime; tests audit the declarations with seeded
probe pairs). Proximal maps are represented as small spec objects that
evaluate ``prox(v)`` for their function at a fixed step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError

# ---------------------------------------------------------------------------
# Expansiveness classes


@dataclass(frozen=True)
class NonExpansive:
    """1-Lipschitz."""


@dataclass(frozen=True)
class Contractive:
    """tau-Lipschitz with tau < 1."""

    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ParameterError(f"contraction factor must be in [0, 1), got {self.tau}")


@dataclass(frozen=True)
class Averaged:
    """lam * R + (1 - lam) * I for a non-expansive R, lam in (0, 1)."""

    lam: float

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ParameterError(f"averaging weight must be in (0, 1), got {self.lam}")


OperatorClass = NonExpansive | Contractive | Averaged


@dataclass(frozen=True)
class OperatorHandle:
    """A map on vectors with declared expansiveness metadata.

    ``apply(u, k)`` takes the current point and the iteration index;
    data-independent operators ignore ``k``. Iteration dependence exists so
    stochastic instantiations can evaluate themselves on the item scheduled
    for step k.
    """

    apply: Callable[[np.ndarray, int], np.ndarray]
    kind: OperatorClass
    data_dependent: bool = False


# ---------------------------------------------------------------------------
# Elementary proximal maps


def prox_l1(v: np.ndarray, threshold: float) -> np.ndarray:
    """Soft thresholding: sign(v) * max(|v| - threshold, 0), componentwise."""
    if threshold < 0:
        raise ParameterError(f"soft-threshold level must be >= 0, got {threshold}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def prox_quadratic_rank_one(a: np.ndarray, b: float, gamma: float, n: int,
                            v: np.ndarray) -> np.ndarray:
    """Solve (a a^T + (2n/gamma) I) x = b a + (2n/gamma) v by Sherman-Morrison.

    This is the proximal update for a single squared-residual row: the
    returned x minimizes (1/2n)(a^T x - b)^2 + (1/gamma)||x - v||^2. The
    matrix is a rank-one perturbation of a scaled identity, so the solve is
    a dot product instead of a dense factorization:

        x = v + (b - a^T v) / (2n/gamma + ||a||^2) * a
    """
    if gamma <= 0:
        raise ParameterError(f"prox step gamma must be > 0, got {gamma}")
    if n < 1:
        raise ParameterError(f"row weight n must be >= 1, got {n}")
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    if a.shape != v.shape:
        raise ParameterError(f"dimension mismatch: a has shape {a.shape}, v has {v.shape}")
    c = 2.0 * n / gamma
    return v + ((b - a @ v) / (c + a @ a)) * a


def clip(v: np.ndarray, threshold: float) -> np.ndarray:
    """Radial projection onto the Euclidean ball of radius threshold."""
    if threshold <= 0:
        raise ParameterError(f"clipping threshold must be > 0, got {threshold}")
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= threshold:
        return v
    return v * (threshold / norm)


# ---------------------------------------------------------------------------
# Prox specs: a proximal map packaged with its parameters


class ProxSpec:
    """Base class; subclasses evaluate prox(v) for their function."""

    def __call__(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroProx(ProxSpec):
    """Prox of the zero function: the identity."""

    def __call__(self, v):
        return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class L1Prox(ProxSpec):
    """Prox of t*||.||_1, i.e. soft threshold at level t (t = gamma*kappa)."""

    threshold: float

    def __post_init__(self):
        if self.threshold < 0:
            raise ParameterError(f"L1 threshold must be >= 0, got {self.threshold}")

    def __call__(self, v):
        return prox_l1(v, self.threshold)


@dataclass(frozen=True)
class QuadraticRankOneProx(ProxSpec):
    """Prox for one squared residual row, solved via Sherman-Morrison."""

    a: np.ndarray
    b: float
    gamma: float
    n: int

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"prox step gamma must be > 0, got {self.gamma}")
        if self.n < 1:
            raise ParameterError(f"row weight n must be >= 1, got {self.n}")

    def __call__(self, v):
        return prox_quadratic_rank_one(self.a, self.b, self.gamma, self.n, v)


@dataclass(frozen=True)
class QuadraticProx(ProxSpec):
    """Prox of gamma * (x^T Q x / 2 + c^T x): solve (I + gamma Q) x = v - gamma c."""

    Q: np.ndarray
    c: np.ndarray
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"prox step gamma must be > 0, got {self.gamma}")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return np.linalg.solve(np.eye(len(v)) + self.gamma * np.asarray(self.Q), v - self.gamma * np.asarray(self.c))


@dataclass(frozen=True)
class CustomProx(ProxSpec):
    """User-supplied prox callback; convexity is the caller's responsibility."""

    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, v):
        return self.fn(np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# Operator constructors


def reflect(prox: ProxSpec) -> OperatorHandle:
    """Reflection through a prox: v -> 2*prox(v) - v. Non-expansive for convex functions."""
    def apply(u, k=0):
        return 2.0 * prox(u) - u
    return OperatorHandle(apply=apply, kind=NonExpansive())


def reflect_compose(prox1: ProxSpec, prox2: ProxSpec, lam: float) -> OperatorHandle:
    """Averaged composition of two reflections: lam*R1(R2(u)) + (1-lam)*u.

    Iterating this operator is the Douglas-Rachford splitting for
    minimizing the sum of the two underlying functions; its fixed points u*
    map to minimizers through the second prox, x* = prox2(u*).
    """
    if not 0.0 < lam < 1.0:
        raise ParameterError(f"averaging weight must be in (0, 1), got {lam}")
    r1 = reflect(prox1)
    r2 = reflect(prox2)

    def apply(u, k=0):
        u = np.asarray(u, dtype=float)
        return lam * r1.apply(r2.apply(u, k), k) + (1.0 - lam) * u

    return OperatorHandle(apply=apply, kind=Averaged(lam))


# The operator is better known under the names of its inventors.
lions_mercier = reflect_compose


def gradient_step_operator(grad: Callable[[np.ndarray], np.ndarray], beta: float,
                           mu: float = 0.0) -> OperatorHandle:
    """Gradient-step operator u -> u - (2/(beta+mu)) * grad(u).

    For a convex beta-smooth function the step 2/beta makes this
    non-expansive; declaring strong convexity mu > 0 shortens the step to
    2/(beta+mu) and the operator becomes (beta-mu)/(beta+mu)-contractive.
    """
    if beta <= 0:
        raise ParameterError(f"smoothness beta must be > 0, got {beta}")
    if mu < 0:
        raise ParameterError(f"strong convexity mu must be >= 0, got {mu}")
    step = 2.0 / (beta + mu)

    def apply(u, k=0):
        u = np.asarray(u, dtype=float)
        return u - step * np.asarray(grad(u), dtype=float)

    kind: OperatorClass
    if mu > 0:
        kind = Contractive((beta - mu) / (beta + mu))
    else:
        kind = NonExpansive()
    return OperatorHandle(apply=apply, kind=kind, data_dependent=False)


# ---------------------------------------------------------------------------
# Probe audit (test utility, not a runtime guard)


def empirical_lipschitz(apply: Callable[..., np.ndarray], dim: int,
                        n_pairs: int = 256, seed: int = 0, radius: float = 1.0) -> float:
    """Largest ||T(u)-T(v)|| / ||u-v|| over seeded random pairs from a ball."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        u = rng.normal(size=dim)
        u *= radius * rng.uniform() ** (1.0 / dim) / np.linalg.norm(u)
        v = rng.normal(size=dim)
        v *= radius * rng.uniform() ** (1.0 / dim) / np.linalg.norm(v)
        gap = np.linalg.norm(u - v)
        if gap < 1e-12:
            continue
        worst = max(worst, np.linalg.norm(np.asarray(apply(u)) - np.asarray(apply(v))) / gap)
    return worst
