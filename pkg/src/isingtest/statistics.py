"""Global bilinear and linear statistics, plus variance and Dirichlet-form estimators."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from collections.abc import Callable

import numpy as np

from .model import IsingModel, check_spins, log_probabilities
from .sampling import glauber_transition_matrix


@dataclass(frozen=True)
class StatisticReport:
    mean: float
    variance: float
    k_used: int
    reps: int

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")
        if self.reps < 2:
            raise ValueError("variance estimates need reps >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_sign_matrix(signs, n: int) -> np.ndarray:
    """Accept either an n x n symmetric matrix or a length C(n,2) vector over u < v."""
    c = np.asarray(signs, dtype=float)
    if c.shape == (n, n):
        if not np.array_equal(c, c.T):
            raise ValueError("pair sign matrix must be symmetric")
        return np.triu(c, 1)
    if c.shape == (n * (n - 1) // 2,):
        out = np.zeros((n, n))
        out[np.triu_indices(n, 1)] = c
        return out
    raise ValueError(f"signs of shape {c.shape} do not match n = {n}")


def bilinear_statistic(x, signs) -> np.ndarray | float:
    """Sum over unordered pairs u < v of c_uv x_u x_v.

    ``x`` may be one configuration or a k x n matrix (one value per row).
    """
    X = np.asarray(x)
    n = X.shape[-1]
    X = check_spins(X, n).astype(float)
    C = _pair_sign_matrix(signs, n)
    out = np.einsum("...u,uv,...v->...", X, C, X)
    return float(out) if out.ndim == 0 else out


def centered_bilinear_statistic(x1, x2, signs) -> np.ndarray | float:
    """Sum over u < v of c_uv (x1_u - x2_u)(x1_v - x2_v)."""
    A = np.asarray(x1)
    B = np.asarray(x2)
    if A.shape != B.shape:
        raise ValueError(f"configuration shapes differ: {A.shape} vs {B.shape}")
    n = A.shape[-1]
    D = check_spins(A, n).astype(float) - check_spins(B, n)
    C = _pair_sign_matrix(signs, n)
    out = np.einsum("...u,uv,...v->...", D, C, D)
    return float(out) if out.ndim == 0 else out


def linear_statistic(x, node_signs, offsets) -> np.ndarray | float:
    """Sum over nodes of c_v (x_v - offset_v)."""
    X = np.asarray(x)
    n = X.shape[-1]
    X = check_spins(X, n).astype(float)
    c = np.asarray(node_signs, dtype=float)
    off = np.asarray(offsets, dtype=float)
    if c.shape != (n,) or off.shape != (n,):
        raise ValueError("node_signs and offsets must have length n")
    out = (X - off) @ c
    return float(out) if np.ndim(out) == 0 else out


def variance_estimate(
    statistic: Callable,
    source,
    reps: int,
    seed: int,
    arity: int = 1,
) -> StatisticReport:
    """Sample mean and unbiased variance of ``statistic`` over ``reps`` draws.

    ``statistic`` maps a k x n batch (``arity=1``) or two of them
    (``arity=2``) to k values.  ``source`` exposes ``draw(k, rng)``.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    if arity not in (1, 2):
        raise ValueError("arity must be 1 or 2")
    rng = np.random.default_rng(seed)
    batches = [source.draw(reps, rng) for _ in range(arity)]
    values = np.asarray(statistic(*batches), dtype=float)
    if values.shape != (reps,):
        raise ValueError("statistic must return one value per row")
    return StatisticReport(float(values.mean()), float(values.var(ddof=1)), reps * arity, reps)


def dirichlet_form_estimate(model: IsingModel, f: Callable, source, k: int, seed: int) -> float:
    """Half the mean squared change of ``f`` over one Glauber step from stationarity.

    ``source`` supplies stationary draws; the step is a single-site heat-bath
    update at a uniformly random node.  ``f`` maps a k x n batch to k values.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    X = np.array(source.draw(k, rng), dtype=np.int8)
    Y = X.copy()
    sites = rng.integers(0, model.n, k)
    local = model.node_theta[sites] + np.einsum("ij,ij->i", model.edge_theta[sites], X.astype(float))
    up = rng.random(k) < 0.5 * (1.0 + np.tanh(local))
    Y[np.arange(k), sites] = np.where(up, 1, -1)
    diff = np.asarray(f(X), dtype=float) - np.asarray(f(Y), dtype=float)
    return 0.5 * float(np.mean(diff**2))


def exact_dirichlet_form(model: IsingModel, f_values) -> float:
    """Exact Dirichlet form of a function given on every enumerated state."""
    P, _ = glauber_transition_matrix(model)
    _, logp, _ = log_probabilities(model)
    pi = np.exp(logp)
    f = np.asarray(f_values, dtype=float)
    diff2 = (f[:, None] - f[None, :]) ** 2
    return 0.5 * float(np.sum(pi[:, None] * P * diff2))


def exact_variance(model: IsingModel, f_values) -> float:
    _, logp, _ = log_probabilities(model)
    pi = np.exp(logp)
    f = np.asarray(f_values, dtype=float)
    mean = pi @ f
    return float(pi @ (f - mean) ** 2)


def exact_spectral_gap(model: IsingModel, max_n: int = 6) -> float:
    """Absolute spectral gap 1 - max(|lambda_2|, |lambda_min|) of the Glauber kernel.

    The kernel is reversible, so it is symmetrized by the stationary weights
    before a dense symmetric eigendecomposition.
    """
    if model.n > max_n:
        raise ValueError(f"exact spectral gap limited to n <= {max_n}")
    P, _ = glauber_transition_matrix(model)
    _, logp, _ = log_probabilities(model)
    s = np.exp(0.5 * logp)
    A = (s[:, None] * P) / s[None, :]
    eig = np.sort(np.linalg.eigvalsh(0.5 * (A + A.T)))
    if eig.size == 1:
        return 1.0
    return float(1.0 - max(abs(eig[-2]), abs(eig[0])))
