"""Exit criteria 1-9, each printing one PASS/FAIL line with its measured numbers."""

import json
import math
import time
from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import random_forest, random_model
from isingtest.cli import main as cli_main
from isingtest.corpora import build_corpora
from isingtest.estimation import empirical_moments, weak_learn_sign_vector, sign_guess_success_probability
from isingtest.hard_instances import make_product_perturbation, make_random_matching, make_two_node_pair
from isingtest.model import (
    IsingModel,
    TesterConfig,
    complete_model,
    exact_summary,
    log_probabilities,
    skl_direct,
    skl_divergence,
    tv_direct,
)
from isingtest.sampling import ExactSource, GlauberSource, glauber_draw, glauber_transition_matrix
from isingtest.statistics import bilinear_statistic, variance_estimate
from isingtest.testers import TESTER_NAMES, run_tester

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail, seconds):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {title}: {detail} ({seconds:.1f} s)")

    return emit


class TestAcceptance:
    def test_1_oracle_consistency(self, report):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        worst_gap, worst_pinsker = 0.0, -math.inf
        for _ in range(100):
            n = int(rng.integers(1, 9))
            p, q = random_model(rng, n), random_model(rng, n)
            skl = skl_divergence(p, exact_summary(p), q, exact_summary(q))
            worst_gap = max(worst_gap, abs(skl - skl_direct(p, q)))
            worst_pinsker = max(worst_pinsker, 2 * tv_direct(p, q) ** 2 - skl)
        seconds = time.perf_counter() - start
        passed = worst_gap <= 1e-9 and worst_pinsker <= 0 and seconds < 10
        report(
            1,
            "oracle consistency",
            passed,
            f"max |closed form - direct| {worst_gap:.2e}, max 2TV^2 - SKL {worst_pinsker:.3f}",
            seconds,
        )
        assert passed

    def test_2_forest_marginals(self, report):
        start = time.perf_counter()
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(100):
            model = random_forest(rng, int(rng.integers(2, 11)), theta_max=2.0)
            mu = exact_summary(model).edge_marginals
            for u, v, theta in model.edges():
                worst = max(worst, abs(mu[u, v] - math.tanh(theta)))
        seconds = time.perf_counter() - start
        passed = worst <= 1e-10 and seconds < 10
        report(2, "forest marginals", passed, f"max |mu - tanh theta| {worst:.2e}", seconds)
        assert passed

    def test_3_ferromagnetic_bounds(self, report):
        start = time.perf_counter()
        rng = np.random.default_rng(3)
        worst = math.inf
        for _ in range(100):
            n = int(rng.integers(2, 10))
            model = random_model(rng, n, h_max=0.0)
            model = IsingModel(np.abs(model.edge_theta), np.zeros(n))
            mu = exact_summary(model).edge_marginals
            for u, v, theta in model.edges():
                worst = min(worst, mu[u, v] - math.tanh(theta))
        worst_bump = math.inf
        for _ in range(50):
            n = int(rng.integers(2, 9))
            base = IsingModel(np.abs(random_model(rng, n, h_max=0.0).edge_theta), np.zeros(n))
            u, v = sorted(int(x) for x in rng.choice(n, 2, replace=False))
            bumped = base.with_edge(u, v, base.edge_theta[u, v] + float(rng.uniform(0.01, 0.5)))
            diff = exact_summary(bumped).edge_marginals - exact_summary(base).edge_marginals
            worst_bump = min(worst_bump, float(diff.min()))
        seconds = time.perf_counter() - start
        passed = worst >= -1e-12 and worst_bump >= -1e-12 and seconds < 30
        report(
            3,
            "ferromagnetic bounds",
            passed,
            f"min (mu - tanh theta) {worst:.3e}, min correlation change after bump {worst_bump:.3e}",
            seconds,
        )
        assert passed

    def test_4_glauber(self, report):
        start = time.perf_counter()
        rng = np.random.default_rng(4)
        worst_balance = 0.0
        for n in range(1, 7):
            model = random_model(rng, n)
            P, _ = glauber_transition_matrix(model)
            pi = np.exp(log_probabilities(model)[1])
            flow = pi[:, None] * P
            worst_balance = max(worst_balance, float(np.max(np.abs(flow - flow.T))))
        model = random_model(rng, 6, theta_max=0.3, h_max=0.5)
        exact = exact_summary(model)
        sampled = empirical_moments(glauber_draw(model, 200_000, seed=4))
        moment_err = max(
            float(np.max(np.abs(sampled.node_marginals - exact.node_marginals))),
            float(np.max(np.abs(sampled.edge_marginals - exact.edge_marginals))),
        )
        seconds = time.perf_counter() - start
        passed = worst_balance <= 1e-10 and moment_err <= 0.01 and seconds < 60
        report(
            4,
            "Glauber correctness",
            passed,
            f"detailed balance {worst_balance:.1e}, moment error {moment_err:.4f}",
            seconds,
        )
        assert passed

    def test_5_weak_learning(self, report):
        start = time.perf_counter()
        rng = np.random.default_rng(5)
        trials = 100_000
        worst_fit, worst_ratio = 0.0, math.inf
        for k in (4, 8, 16, 32, 64):
            for lam in (0.01, 0.025, 0.05, 0.075, 0.1):
                obs = np.where(rng.random((k, trials)) < 0.5 + lam, 1, -1).astype(np.int8)
                signs = weak_learn_sign_vector(lambda _: obs, trials, 1.0, 1.0, rng, k=k)
                exact = sign_guess_success_probability(k, 0.5 + lam)
                worst_fit = max(worst_fit, abs(float(np.mean(signs == 1)) - exact))
                worst_ratio = min(worst_ratio, (exact - 0.5) / (lam * math.sqrt(k)))
        seconds = time.perf_counter() - start
        passed = worst_fit <= 0.01 and worst_ratio >= 0.15 and seconds < 300
        report(
            5,
            "weak learning",
            passed,
            f"max |empirical - exact| {worst_fit:.4f}, min advantage / (lambda sqrt k) {worst_ratio:.3f}",
            seconds,
        )
        assert passed

    def test_6_variance_bound(self, report):
        start = time.perf_counter()
        signs10 = np.ones(45)
        uniform = variance_estimate(
            lambda X: bilinear_statistic(X, signs10), ExactSource(IsingModel.uniform(10)), 10_000, 6
        )
        sizes, variances = (8, 16, 32), []
        for n in sizes:
            model = complete_model(n, 1 / (4 * (n - 1)))
            source = ExactSource(model) if n <= 16 else GlauberSource(model)
            signs = np.ones(n * (n - 1) // 2)
            variances.append(variance_estimate(lambda X: bilinear_statistic(X, signs), source, 10_000, n).variance)
        slope = float(np.polyfit(np.log(sizes), np.log(variances), 1)[0])
        seconds = time.perf_counter() - start
        passed = abs(uniform.variance - 45) <= 4.5 and slope <= 2.5 and seconds < 300
        detail = f"uniform n=10 variance {uniform.variance:.2f}, log-log slope {slope:.3f} from {[round(v, 1) for v in variances]}"
        report(6, "variance bound", passed, detail, seconds)
        assert passed

    def test_7_tester_power(self, report):
        start = time.perf_counter()
        corpora = build_corpora()
        lines, passed = [], True
        for name in TESTER_NAMES:
            c = corpora[name]
            assert c.certified_distance >= 2 * c.epsilon - 1e-12

            def reject_rate(model):
                source = ExactSource(model)
                verdicts = [
                    run_tester(name, source, TesterConfig(c.epsilon, rng_seed=seed), q=c.reference, **c.params)
                    for seed in range(100)
                ]
                return sum(v.rejected for v in verdicts) / 100

            accept_null = 1 - reject_rate(c.null)
            reject_far = reject_rate(c.far)
            ok = accept_null >= 0.8 and reject_far >= 0.8
            passed &= ok
            lines.append(f"{name} null accept {accept_null:.2f} far reject {reject_far:.2f}")
        seconds = time.perf_counter() - start
        passed &= seconds < 900
        report(7, "tester power at n=12", passed, "; ".join(lines), seconds)
        assert passed

    def test_8_hard_instances(self, report):
        start = time.perf_counter()
        worst = 0.0
        for n in (2, 4, 6, 8, 10, 12):
            for eps in (0.05, 0.2, 0.5):
                if eps > n / 6:
                    continue
                for seed in range(3):
                    for inst in (make_product_perturbation(n, eps, seed), make_random_matching(n, eps, seed)):
                        worst = max(worst, abs(inst.certified_skl - skl_direct(inst.model, IsingModel.uniform(n))))
        # with parameter 1 the identity brackets [1/2, 1] cover SKL values from 0.15 to 0.76
        grids = {"beta-independence": (0.05, 0.1, 0.2), "beta-identity": (0.2, 0.4, 0.7), "h-identity": (0.2, 0.4, 0.7)}
        for mode, param in (("beta-independence", 1.0), ("beta-identity", 1.0), ("h-identity", 1.0)):
            for eps in grids[mode]:
                p, q, skl = make_two_node_pair(mode, param, eps)
                worst = max(worst, abs(skl - skl_direct(p, q)))
        edge_counts = Counter(
            (u, v) for seed in range(10_000) for u, v, _ in make_random_matching(6, 0.12, seed).model.edges()
        )
        observed = [edge_counts[pair] for pair in combinations(range(6), 2)]
        pvalue = float(chisquare(observed).pvalue)
        seconds = time.perf_counter() - start
        passed = worst <= 1e-9 and pvalue > 0.001 and seconds < 120
        report(
            8,
            "hard instances",
            passed,
            f"max |certified - direct| {worst:.2e}, matching edge chi-square p {pvalue:.3f}",
            seconds,
        )
        assert passed

    def test_9_determinism(self, report, tmp_path, capsys):
        start = time.perf_counter()
        spec = {
            "tester": "loc-ind",
            "instances": [
                {"name": "null", "family": "uniform", "params": {"n": 8}},
                {"name": "far", "family": "random-matching", "params": {"n": 8, "eps": 0.5, "seed": 2}},
            ],
            "budgets": [100, 400, 1600],
            "trials": 10,
            "seed": 9,
            "epsilon": 0.25,
            "tester_params": {"beta": 0.5, "m_bound": 4},
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        codes = [cli_main(["experiment", "--config", str(path), "--out", str(tmp_path / out)]) for out in ("a", "b")]
        capsys.readouterr()
        files = ("trials.csv", "summary.csv", "power.csv")
        identical = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
        seconds = time.perf_counter() - start
        passed = codes == [0, 0] and identical
        report(9, "determinism", passed, f"exit codes {codes}, byte-identical {identical}", seconds)
        assert passed
