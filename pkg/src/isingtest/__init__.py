"""Sampling, exact inference and property testers for Ising models."""

from .estimation import MomentTable, empirical_moments, recenter_stream, sign_guess, weak_learn_sign_vector
from .hard_instances import HardInstance, make_product_perturbation, make_random_matching, make_two_node_pair
from .model import (
    ExactSummary,
    IsingModel,
    TesterConfig,
    classify_model,
    dobrushin_check,
    exact_summary,
    skl_direct,
    skl_divergence,
    skl_independence_gap,
    tv_direct,
)
from .sampling import GlauberConfig, SampleBatch, exact_draw, glauber_draw
from .testers import TestVerdict, Witness, run_tester

__version__ = "0.1.0"

__all__ = [
    "ExactSummary",
    "GlauberConfig",
    "HardInstance",
    "IsingModel",
    "MomentTable",
    "SampleBatch",
    "TestVerdict",
    "TesterConfig",
    "Witness",
    "classify_model",
    "dobrushin_check",
    "empirical_moments",
    "exact_draw",
    "exact_summary",
    "glauber_draw",
    "make_product_perturbation",
    "make_random_matching",
    "make_two_node_pair",
    "recenter_stream",
    "run_tester",
    "sign_guess",
    "skl_direct",
    "skl_divergence",
    "skl_independence_gap",
    "tv_direct",
    "weak_learn_sign_vector",
]
