"""Exact inversion sampling (small n) and single-site Glauber dynamics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import IsingModel, check_spins, dobrushin_check, log_probabilities

log = logging.getLogger(__name__)

_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class SampleBatch:
    spins: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = check_spins(self.spins)
        if s.ndim != 2:
            raise ValueError("spins must be a k x n matrix")
        s.setflags(write=False)
        object.__setattr__(self, "spins", s)
        meta = dict(self.meta)
        meta["k"] = s.shape[0]
        object.__setattr__(self, "meta", meta)

    @property
    def k(self) -> int:
        return self.spins.shape[0]

    @property
    def n(self) -> int:
        return self.spins.shape[1]


@dataclass(frozen=True)
class GlauberConfig:
    """Step counts are ``ceil(multiplier * n * ln n)`` (at least one step)."""

    burn_in_multiplier: float = 10.0
    thinning_multiplier: float = 2.0
    chains: int = 4
    dobrushin_eta: float = 0.05

    def __post_init__(self):
        if not (self.burn_in_multiplier > 0 and self.thinning_multiplier > 0):
            raise ValueError("multipliers must be positive")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    def steps(self, multiplier: float, n: int) -> int:
        return max(1, math.ceil(multiplier * n * math.log(max(n, 2))))


def exact_draw(model: IsingModel, k: int, seed: int) -> SampleBatch:
    """Draw ``k`` i.i.d. samples by inverting the cumulative state distribution."""
    states, logp, _ = log_probabilities(model)
    cdf = np.cumsum(np.exp(logp))
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    idx = np.searchsorted(cdf, rng.random(k), side="right")
    idx = np.minimum(idx, len(cdf) - 1)
    return SampleBatch(states[idx], {"sampler": "exact", "seed": seed})


def glauber_up_probability(model: IsingModel, x: np.ndarray, u: int) -> float:
    """P(X_u = +1 | X_-u = x_-u) = e^a / (e^a + e^-a) with a the local field at ``u``."""
    a = model.node_theta[u] + float(model.edge_theta[u] @ x)
    return 0.5 * (1.0 + math.tanh(a))


def glauber_step(model: IsingModel, x, rng: np.random.Generator) -> np.ndarray:
    x = check_spins(x, model.n).copy()
    u = int(rng.integers(model.n))
    x[u] = 1 if rng.random() < glauber_up_probability(model, x.astype(float), u) else -1
    return x


def glauber_transition_matrix(model: IsingModel) -> tuple[np.ndarray, np.ndarray]:
    """Dense Glauber kernel over the enumerated state space, plus the states.

    Row/column order follows :func:`isingtest.model.all_states`.
    """
    states, _, _ = log_probabilities(model)
    n, S = model.n, states.shape[0]
    X = states.astype(float)
    local = X @ model.edge_theta + model.node_theta  # a_u(x); diagonal of J is zero
    p_up = 0.5 * (1.0 + np.tanh(local))
    P = np.zeros((S, S))
    rows = np.arange(S)
    for u in range(n):
        flipped = rows ^ (1 << u)
        # probability the update at u lands on the opposite spin
        p_flip = np.where(states[:, u] > 0, 1.0 - p_up[:, u], p_up[:, u]) / n
        P[rows, flipped] += p_flip
    P[rows, rows] = 1.0 - P.sum(axis=1)
    return P, states


@numba.njit(cache=True)
def _glauber_block(x, indptr, indices, weights, h, sites, uniforms, thin, n_out, out, out_offset):
    t = 0
    for r in range(n_out):
        for _ in range(thin):
            u = sites[t]
            a = h[u]
            for j in range(indptr[u], indptr[u + 1]):
                a += weights[j] * x[indices[j]]
            if uniforms[t] < 0.5 * (1.0 + math.tanh(a)):
                x[u] = 1
            else:
                x[u] = -1
            t += 1
        for j in range(x.shape[0]):
            out[out_offset + r, j] = x[j]


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    # (seed, chain) -> independent stream; adding chains never changes existing ones
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,))))


def _run_chain(model: IsingModel, n_samples: int, burn_in: int, thin: int, rng: np.random.Generator) -> np.ndarray:
    n = model.n
    indptr, indices, weights = model.neighbors
    h = np.ascontiguousarray(model.node_theta)
    x = np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)
    out = np.empty((n_samples, n), dtype=np.int8)
    scratch = np.empty((1, n), dtype=np.int8)
    _glauber_block(
        x, indptr, indices, weights, h, rng.integers(0, n, burn_in), rng.random(burn_in), burn_in, 1, scratch, 0
    )
    done = 0
    while done < n_samples:
        r = min(_BLOCK, n_samples - done)
        steps = r * thin
        _glauber_block(x, indptr, indices, weights, h, rng.integers(0, n, steps), rng.random(steps), thin, r, out, done)
        done += r
    return out


def glauber_draw(
    model: IsingModel,
    k: int,
    config: GlauberConfig = GlauberConfig(),
    seed: int = 0,
    allow_low_temperature: bool = False,
) -> SampleBatch:
    """Collect ``k`` samples across ``config.chains`` independent chains.

    Each chain starts from uniform random spins, runs its own burn-in, then
    keeps one state every ``thinning`` steps.  Rows are interleaved by chain
    index (row ``i`` comes from chain ``i % chains``).
    """
    high_temp = dobrushin_check(model, config.dobrushin_eta)
    if not high_temp:
        if not allow_low_temperature:
            raise ValueError("model fails the Dobrushin condition; pass allow_low_temperature=True to sample anyway")
        log.warning("Glauber sampling outside the high-temperature regime; mixing is not guaranteed")
    n = model.n
    burn_in = config.steps(config.burn_in_multiplier, n)
    thin = config.steps(config.thinning_multiplier, n)
    chains = min(config.chains, max(k, 1))
    spins = np.empty((k, n), dtype=np.int8)
    for c in range(chains):
        count = len(range(c, k, chains))
        if count:
            spins[c::chains] = _run_chain(model, count, burn_in, thin, _chain_rng(seed, c))
    meta = {
        "sampler": "glauber",
        "seed": seed,
        "burn_in": burn_in,
        "thinning": thin,
        "chains": chains,
        "high_temperature": bool(high_temp),
    }
    return SampleBatch(spins, meta)


class ExactSource:
    """Sample source backed by :func:`exact_draw`; each call consumes one seed from ``rng``."""

    kind = "exact"

    def __init__(self, model: IsingModel):
        self.model = model
        self.n = model.n
        self._cache = None

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self._cache is None:
            states, logp, _ = log_probabilities(self.model)
            cdf = np.cumsum(np.exp(logp))
            self._cache = (states, cdf / cdf[-1])
        states, cdf = self._cache
        idx = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), len(cdf) - 1)
        return states[idx]


class GlauberSource:
    kind = "glauber"

    def __init__(self, model: IsingModel, config: GlauberConfig = GlauberConfig(), allow_low_temperature=False):
        self.model = model
        self.n = model.n
        self.config = config
        self.allow_low_temperature = allow_low_temperature

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        seed = int(rng.integers(0, 2**63))
        return glauber_draw(self.model, k, self.config, seed, self.allow_low_temperature).spins


class BatchSource:
    """Replays a fixed sample matrix in order; raises once it runs dry."""

    kind = "batch"

    def __init__(self, spins):
        self.spins = check_spins(spins)
        self.n = self.spins.shape[1]
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self.spins.shape[0] - self.pos

    def draw(self, k: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if k > self.remaining:
            raise ValueError(f"requested {k} samples but only {self.remaining} remain")
        out = self.spins[self.pos : self.pos + k]
        self.pos += k
        return out


class FlippedSource:
    """Wraps a source and negates every spin it returns."""

    def __init__(self, inner):
        self.inner = inner
        self.n = inner.n
        self.kind = getattr(inner, "kind", "source")

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return -self.inner.draw(k, rng)
