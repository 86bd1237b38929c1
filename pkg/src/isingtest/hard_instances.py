"""Perturbation families with certified distance from their null model.

Each generator returns models whose SKL distance to the matching null
(uniform, or the paired model) is known in closed form or solved for, so
power experiments have a guaranteed-far corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import IsingModel

_BISECTION_TOL = 1e-10
_BISECTION_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class HardInstance:
    model: IsingModel
    family: str
    certified_skl: float
    delta: float
    epsilon: float

    def __post_init__(self):
        if self.certified_skl < self.epsilon * (1 - 1e-12):
            raise ValueError(f"certified SKL {self.certified_skl} is below the target {self.epsilon}")

    def sidecar(self) -> dict:
        return {
            "family": self.family,
            "delta": self.delta,
            "certified_skl": self.certified_skl,
            "epsilon": self.epsilon,
        }


def make_product_perturbation(n: int, eps: float, sign_choice=0) -> HardInstance:
    """Node fields of magnitude sqrt(3 eps / 2n) with signs from ``sign_choice``.

    ``sign_choice`` is a length-n vector of +-1 or an integer seed.  The SKL
    distance to the uniform model is n delta tanh(delta), at least eps.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < eps <= n / 6:
        raise ValueError(f"eps must lie in (0, n/6] so that delta <= 1, got {eps}")
    delta = math.sqrt(3 * eps / (2 * n))
    if np.ndim(sign_choice) == 0:
        rng = np.random.default_rng(int(sign_choice))
        signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    else:
        signs = np.asarray(sign_choice, dtype=float)
        if signs.shape != (n,) or not np.all(np.abs(signs) == 1):
            raise ValueError("sign_choice must be a length-n vector of +-1")
    model = IsingModel(np.zeros((n, n)), delta * signs)
    return HardInstance(model, "product-perturbation", n * delta * math.tanh(delta), delta, eps)


def random_perfect_matching(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform perfect matching: shuffle the nodes and pair consecutive entries."""
    if n % 2:
        raise ValueError(f"a perfect matching needs an even node count, got {n}")
    perm = rng.permutation(n)
    return [tuple(sorted((int(perm[i]), int(perm[i + 1])))) for i in range(0, n, 2)]


def make_random_matching(n: int, eps: float, seed: int = 0) -> HardInstance:
    """Ferromagnetic edges of weight sqrt(3 eps / n) on a uniform perfect matching.

    The SKL distance to the uniform model is (n/2) delta tanh(delta).
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and positive, got {n}")
    if not 0 < eps <= n / 3:
        raise ValueError(f"eps must lie in (0, n/3] so that delta <= 1, got {eps}")
    delta = math.sqrt(3 * eps / n)
    pairs = random_perfect_matching(n, np.random.default_rng(seed))
    model = IsingModel.from_edges(n, [(u, v, delta) for u, v in pairs])
    return HardInstance(model, "random-matching", (n / 2) * delta * math.tanh(delta), delta, eps)


def _two_spin_correlation(field: float, coupling: float) -> float:
    """E[X_u X_v] for two spins sharing ``field`` and coupled by ``coupling``."""
    # states (+,+), (-,-) have energy coupling +- 2 field; mixed states -coupling
    a = np.array([coupling + 2 * field, coupling - 2 * field, -coupling, -coupling])
    w = np.exp(a - a.max())
    return float((w[0] + w[1] - w[2] - w[3]) / w.sum())


def _bisect(f, lo: float, hi: float) -> float:
    """Root of an increasing-or-decreasing ``f`` on [lo, hi] with |f| <= tolerance."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise ValueError("no root in the bracket; parameters lie outside the construction's regime")
    for _ in range(_BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= _BISECTION_TOL:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise ValueError("bisection did not reach the residual tolerance")


def make_two_node_pair(mode: str, beta_or_h: float, eps: float) -> tuple[IsingModel, IsingModel, float]:
    """Two small models at SKL distance exactly ``eps``; returns (p, q, skl).

    beta-independence: p has fields tau on both nodes and edge beta, q the same
        fields with no edge; tau is solved on [0, inf).
    beta-identity: p has edge beta, q edge beta - tau, tau in [beta/2, beta].
    h-identity: one node; p has field h - tau, q field h, tau in [h/2, h].
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    b = float(beta_or_h)
    if not b > 0:
        raise ValueError("beta / h must be positive")
    if mode == "beta-independence":

        def skl(tau):
            return b * (_two_spin_correlation(tau, b) - math.tanh(tau) ** 2)

        hi = 1.0
        while skl(hi) > eps:
            hi *= 2
            if hi > 1e4:
                raise ValueError("no field strength reaches the target distance")
        tau = _bisect(lambda t: skl(t) - eps, 0.0, hi)
        p = IsingModel.from_edges(2, [(0, 1, b)], [tau, tau])
        q = IsingModel(np.zeros((2, 2)), np.array([tau, tau]))
        return p, q, skl(tau)
    if mode == "beta-identity":

        def skl(tau):
            return tau * (math.tanh(b) - math.tanh(b - tau))

        tau = _bisect(lambda t: skl(t) - eps, b / 2, b)
        p = IsingModel.from_edges(2, [(0, 1, b)])
        q = IsingModel.from_edges(2, [(0, 1, b - tau)]) if tau < b else IsingModel.uniform(2)
        return p, q, skl(tau)
    if mode == "h-identity":

        def skl(tau):
            return tau * (math.tanh(b) - math.tanh(b - tau))

        tau = _bisect(lambda t: skl(t) - eps, b / 2, b)
        p = IsingModel(np.zeros((1, 1)), np.array([b - tau]))
        q = IsingModel(np.zeros((1, 1)), np.array([b]))
        return p, q, skl(tau)
    raise ValueError(f"unknown mode {mode!r}")
