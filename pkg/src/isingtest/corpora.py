"""Desk-scale null and far instances for each tester at n = 12.

Each corpus fixes the tester parameters once and pairs a model that meets
the null hypothesis with one whose distance from it is certified by
enumeration.  The distance target is set to half the certified distance,
so far instances sit at twice the tester's epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, cache

from scipy.optimize import brentq

from .model import IsingModel, complete_model, exact_summary, path_model, skl_direct, skl_to_product_set

CORPUS_N = 12


@dataclass(frozen=True, eq=False)
class Corpus:
    tester: str
    null: IsingModel
    far: IsingModel
    epsilon: float
    certified_distance: float
    reference: IsingModel | None = None
    params: dict = field(default_factory=dict)


def _distance_to_products(model: IsingModel) -> float:
    return skl_to_product_set(model, exact_summary(model))[0]


def _independence(tester, far, params, n=CORPUS_N):
    d = _distance_to_products(far)
    return Corpus(tester, IsingModel.uniform(n), far, d / 2, d, None, params)


def _identity(tester, q, far, params):
    d = skl_direct(far, q)
    return Corpus(tester, q, far, d / 2, d, q, params)


@cache
def build_corpora(n: int = CORPUS_N) -> dict[str, Corpus]:
    out = {}

    # perfect matching with total gap 0.5
    theta = brentq(lambda t: (n // 2) * t * math.tanh(t) - 0.5, 1e-3, 2.0)
    far = IsingModel.from_edges(n, [(2 * i, 2 * i + 1, theta) for i in range(n // 2)])
    out["loc-ind"] = _independence("loc-ind", far, {"beta": theta, "m_bound": n // 2})

    # path with fields; three edges flip sign
    q = path_model(n, 0.25, 0.1)
    far = q.with_edge(1, 2, -0.25).with_edge(5, 6, -0.25).with_edge(9, 10, -0.25)
    out["loc-id"] = _identity("loc-id", q, far, {"beta": 0.25, "h": 0.1, "m_bound": n - 1})

    # zero-field path with total gap 0.5
    theta = brentq(lambda t: (n - 1) * t * math.tanh(t) - 0.5, 1e-3, 2.0)
    out["forest-ind"] = _independence("forest-ind", path_model(n, theta), {})

    # path at 0.4 against the same path at 0.4 + delta, distance 0.2
    q = path_model(n, 0.4)
    delta = brentq(lambda d: skl_direct(path_model(n, 0.4 + d), q) - 0.2, 1e-3, 1.0)
    out["forest-id"] = _identity("forest-id", q, path_model(n, 0.4 + delta), {"beta": 0.4 + delta})

    # ferromagnetic star on six of the nodes
    far = IsingModel.from_edges(n, [(0, i, 0.2) for i in range(1, 6)])
    out["ferro-ind"] = _independence("ferro-ind", far, {"d_max": 5})

    # dense high-temperature graph, weights 1/(4n) with alternating signs
    beta = 1.0 / (4 * n)
    far = complete_model(n, beta, alternating=True)
    out["ltt-ind"] = _independence("ltt-ind", far, {"beta": beta, "d_max": n - 1})

    # fields 0.3 on a ferromagnetic complete graph; the far model alternates edge signs
    q = complete_model(n, 0.08, alternating=False, field=0.3)
    far = complete_model(n, 0.08, alternating=True, field=0.3)
    out["ltt-id"] = _identity("ltt-id", q, far, {"beta": 0.08, "h": 0.3, "d_max": n - 1})
    return out
