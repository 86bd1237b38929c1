"""Empirical moments and weak learning of signs of Rademacher means."""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Callable

import numpy as np
from scipy.stats import binom

from .model import ExactSummary


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Node marginals, pair marginals and covariances, exact or empirical.

    ``source`` is ``"exact"`` or ``"empirical"``; ``k`` is the sample count
    behind an empirical table (``None`` for exact ones).
    """

    node_marginals: np.ndarray
    edge_marginals: np.ndarray
    source: str = "exact"
    k: int | None = None

    def __post_init__(self):
        mu = np.asarray(self.node_marginals, dtype=float)
        mu2 = np.asarray(self.edge_marginals, dtype=float)
        n = mu.shape[0]
        if mu2.shape != (n, n):
            raise ValueError("edge_marginals must be n x n")
        if np.any(np.abs(mu) > 1 + 1e-12) or np.any(np.abs(mu2) > 1 + 1e-12):
            raise ValueError("marginals must lie in [-1, 1]")
        if not np.allclose(mu2, mu2.T, atol=0):
            raise ValueError("edge_marginals must be symmetric")
        for name, a in (("node_marginals", mu), ("edge_marginals", mu2)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        cov = mu2 - np.outer(mu, mu)
        np.fill_diagonal(cov, 0.0)
        if np.any(np.abs(cov) > 1 + 1e-12):
            raise ValueError("covariances outside [-1, 1]")
        cov.setflags(write=False)
        object.__setattr__(self, "covariances", cov)

    @property
    def n(self) -> int:
        return self.node_marginals.shape[0]

    @classmethod
    def from_summary(cls, summary: ExactSummary) -> MomentTable:
        return cls(summary.node_marginals, summary.edge_marginals, "exact")


def empirical_moments(spins) -> MomentTable:
    """Sample means of X_u and X_u X_v over the rows of a k x n spin matrix.

    Accepts a :class:`~isingtest.sampling.SampleBatch` or a bare array.
    """
    X = np.asarray(getattr(spins, "spins", spins))
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empirical_moments needs a non-empty k x n batch")
    k = X.shape[0]
    Xf = X.astype(float)
    mu = Xf.sum(axis=0) / k
    mu2 = (Xf.T @ Xf) / k
    np.fill_diagonal(mu2, 1.0)
    return MomentTable(mu, mu2, "empirical", k)


def sign_vector(values) -> np.ndarray:
    """Validate a +-1 vector (or matrix) of signs."""
    a = np.asarray(values)
    if not np.all(np.abs(a) == 1):
        raise ValueError("sign vector entries must be exactly +1 or -1")
    return a.astype(np.int8)


def pair_signs_to_matrix(signs, n: int) -> np.ndarray:
    """Expand a length C(n,2) pair-sign vector (row-major over u < v) into a
    symmetric n x n matrix with zero diagonal."""
    signs = np.asarray(signs, dtype=float)
    if signs.shape[-1] != n * (n - 1) // 2:
        raise ValueError(f"expected {n * (n - 1) // 2} pair signs, got {signs.shape[-1]}")
    C = np.zeros(signs.shape[:-1] + (n, n))
    iu = np.triu_indices(n, 1)
    C[..., iu[0], iu[1]] = signs
    C[..., iu[1], iu[0]] = signs
    return C


def sign_guess(values, rng: np.random.Generator) -> int:
    """Sign of the sum of +-1 observations; a fair coin when the sum is zero."""
    a = np.asarray(values)
    if a.size == 0:
        raise ValueError("sign_guess needs at least one observation")
    s = int(a.sum())
    if s:
        return 1 if s > 0 else -1
    return 1 if rng.random() < 0.5 else -1


def sign_guess_success_probability(k: int, p: float) -> float:
    """Exact probability that :func:`sign_guess` on ``k`` Rademacher(p) draws returns +1."""
    # sum > 0  <=>  #plus > k/2
    prob = binom.sf(k // 2, k, p)
    if k % 2 == 0:
        prob += 0.5 * binom.pmf(k // 2, k, p)
    return float(prob)


def resolve_zeros(values, rng: np.random.Generator) -> np.ndarray:
    """Replace every 0 in a {-1, 0, +1} array by a fair coin."""
    a = np.asarray(values).astype(np.int8)
    zeros = a == 0
    if zeros.any():
        a = a.copy()
        a[zeros] = np.where(rng.random(int(zeros.sum())) < 0.5, -1, 1)
    return a


def recenter_stream(x_values, y_values, rng: np.random.Generator) -> np.ndarray:
    """Element-wise (x - y) / 2 where x != y, a fair coin where x == y.

    For x ~ Rademacher(p), y ~ Rademacher(q) the output is
    Rademacher(1/2 + (p - q)/2), so its sign tracks sign(p - q).
    """
    x = np.asarray(x_values)
    y = np.asarray(y_values)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return resolve_zeros((x.astype(np.int16) - y) // 2, rng)


def weak_learn_count(n: int, tau: float, eps_over_beta: float, c_wl: float = 1.0) -> int:
    """Observations per item, ceil(c_wl * n^(2 tau) / (eps/beta)^2)."""
    if not 0 < tau <= 2:
        raise ValueError(f"tau must lie in (0, 2], got {tau}")
    if not eps_over_beta > 0:
        raise ValueError("eps_over_beta must be positive")
    return max(1, math.ceil(c_wl * n ** (2 * tau) / eps_over_beta**2))


def weak_learn_sign_vector(
    batch_provider: Callable[[int], np.ndarray],
    num_items: int,
    tau: float,
    eps_over_beta: float,
    rng: np.random.Generator,
    n: int | None = None,
    c_wl: float = 1.0,
    k: int | None = None,
) -> np.ndarray:
    """Weakly learn the signs of the means of ``num_items`` correlated items.

    ``batch_provider(k)`` must return a ``k x num_items`` array of
    observations in {-1, 0, +1}; zeros are coin-resolved first.  Each
    output sign is the sign of the item's empirical mean, with a coin on
    ties.  ``n`` (default ``num_items``) sets the scale in the sample count;
    ``k`` overrides the count entirely.
    """
    if k is None:
        k = weak_learn_count(num_items if n is None else n, tau, eps_over_beta, c_wl)
    obs = np.asarray(batch_provider(k))
    if obs.shape != (k, num_items):
        raise ValueError(f"batch_provider returned shape {obs.shape}, expected {(k, num_items)}")
    obs = resolve_zeros(obs, rng)
    sums = obs.sum(axis=0, dtype=np.int64)
    coins = np.where(rng.random(num_items) < 0.5, -1, 1)
    return np.where(sums > 0, 1, np.where(sums < 0, -1, coins)).astype(np.int8)


def pair_products(X) -> np.ndarray:
    """k x C(n,2) matrix of X_u X_v over pairs u < v (row-major)."""
    X = np.asarray(X, dtype=np.int8)
    iu, iv = np.triu_indices(X.shape[1], 1)
    return X[:, iu] * X[:, iv]


def centered_pair_products(X1, X2) -> np.ndarray:
    """(X1_u - X2_u)(X1_v - X2_v) / 4 over pairs, values in {-1, 0, +1}."""
    D = (np.asarray(X1, dtype=np.int8) - np.asarray(X2, dtype=np.int8)) // 2
    iu, iv = np.triu_indices(D.shape[1], 1)
    return D[:, iu] * D[:, iv]


def rademacher_draws(means, k: int, rng: np.random.Generator) -> np.ndarray:
    """k rows of independent +-1 draws with the given means."""
    means = np.asarray(means, dtype=float)
    return np.where(rng.random((k,) + means.shape) < 0.5 * (1.0 + means), 1, -1).astype(np.int8)
