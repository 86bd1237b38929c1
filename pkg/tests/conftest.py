"""Shared fixtures and an itertools brute-force oracle independent of the package."""

import itertools
import math

import numpy as np
import pytest

from isingtest.model import IsingModel


def brute_states(n):
    return [np.array(s, dtype=float) for s in itertools.product((-1.0, 1.0), repeat=n)]


def brute_weights(model: IsingModel):
    """Unnormalized weights and the log-partition by direct summation."""
    J, h = np.asarray(model.edge_theta), np.asarray(model.node_theta)
    n = model.n
    logs = []
    for x in brute_states(n):
        e = sum(h[v] * x[v] for v in range(n))
        e += sum(J[u, v] * x[u] * x[v] for u in range(n) for v in range(u + 1, n))
        logs.append(e)
    logs = np.array(logs)
    top = logs.max()
    z = np.exp(logs - top).sum()
    return np.exp(logs - top) / z, top + math.log(z)


def brute_moments(model: IsingModel):
    p, _ = brute_weights(model)
    X = np.array(brute_states(model.n))
    return p @ X, (X * p[:, None]).T @ X


def brute_skl(p_model, q_model):
    p, _ = brute_weights(p_model)
    q, _ = brute_weights(q_model)
    return float(np.sum((p - q) * (np.log(p) - np.log(q))))


def random_model(rng, n, theta_max=1.0, h_max=1.0, density=0.6):
    J = np.zeros((n, n))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < density:
                J[u, v] = J[v, u] = rng.uniform(-theta_max, theta_max)
    return IsingModel(J, rng.uniform(-h_max, h_max, n))


def random_forest(rng, n, theta_max=1.0, keep=0.8):
    """Random recursive tree on n nodes with each edge kept with probability ``keep``."""
    edges = []
    for v in range(1, n):
        if rng.random() < keep:
            edges.append((int(rng.integers(v)), v, float(rng.uniform(-theta_max, theta_max))))
    return IsingModel.from_edges(n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
