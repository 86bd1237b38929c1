import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_moments, brute_skl, brute_weights, random_forest, random_model
from isingtest.model import (
    ENUMERATION_CUTOFF,
    EnumerationLimitError,
    IsingModel,
    TesterConfig,
    all_states,
    classify_model,
    complete_model,
    dobrushin_check,
    dobrushin_sum,
    exact_summary,
    is_forest,
    log_pmf,
    log_probabilities,
    path_model,
    skl_direct,
    skl_divergence,
    skl_independence_gap,
    skl_to_product_set,
    star_model,
    tv_direct,
)

SINGLE_EDGE = IsingModel.from_edges(2, [(0, 1, 0.5)])


class TestIsingModel:
    def test_rejects_asymmetric(self):
        J = np.array([[0.0, 0.5], [0.4, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            IsingModel(J, np.zeros(2))

    def test_rejects_self_interaction(self):
        with pytest.raises(ValueError):
            IsingModel(np.eye(2), np.zeros(2))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            IsingModel(np.zeros((2, 2)), np.array([np.nan, 0.0]))

    def test_rejects_wrong_field_length(self):
        with pytest.raises(ValueError):
            IsingModel(np.zeros((3, 3)), np.zeros(2))

    def test_arrays_are_read_only(self):
        m = path_model(3, 0.2)
        with pytest.raises(ValueError):
            m.edge_theta[0, 1] = 1.0

    def test_summary_properties(self):
        m = star_model(5, -0.3, field=0.2)
        assert m.n == 5 and m.m == 4 and m.d_max == 4
        assert m.beta == pytest.approx(0.3) and m.h == pytest.approx(0.2)
        assert m.edges()[0] == (0, 1, -0.3)

    def test_equality_is_by_value(self):
        assert path_model(4, 0.1) == path_model(4, 0.1)
        assert path_model(4, 0.1) != path_model(4, 0.2)

    def test_neighbors_csr(self):
        indptr, indices, weights = path_model(3, 0.7).neighbors
        assert list(indptr) == [0, 1, 3, 4]
        assert list(indices) == [1, 0, 2, 1]
        assert np.allclose(weights, 0.7)

    def test_complete_alternating_signs(self):
        m = complete_model(4, 0.1, alternating=True)
        assert m.edge_theta[0, 1] == -0.1 and m.edge_theta[0, 2] == 0.1


class TestEnumeration:
    def test_state_order(self):
        S = all_states(3)
        assert S.shape == (8, 3)
        assert list(S[0]) == [-1, -1, -1] and list(S[1]) == [1, -1, -1]

    def test_single_edge_log_partition(self):
        # hand value: log(2 e^0.5 + 2 e^-0.5) = log 4 + log cosh 0.5
        phi = exact_summary(SINGLE_EDGE).log_partition
        assert phi == pytest.approx(math.log(4 * math.cosh(0.5)), abs=1e-12)
        assert phi == pytest.approx(1.506408868078168, abs=1e-12)

    def test_single_edge_marginal_is_tanh(self):
        s = exact_summary(SINGLE_EDGE)
        assert s.edge_marginals[0, 1] == pytest.approx(math.tanh(0.5), abs=1e-12)
        assert np.allclose(s.node_marginals, 0.0)

    def test_triangle_exceeds_tanh(self):
        m = complete_model(3, 0.3)
        mu = exact_summary(m).edge_marginals[0, 1]
        assert mu == pytest.approx(0.36710031651312547, abs=1e-12)
        assert mu >= math.tanh(0.3)

    def test_matches_brute_force(self, rng):
        for _ in range(10):
            m = random_model(rng, int(rng.integers(1, 7)))
            s = exact_summary(m)
            mu, mu2 = brute_moments(m)
            _, phi = brute_weights(m)
            assert s.log_partition == pytest.approx(phi, abs=1e-10)
            assert np.allclose(s.node_marginals, mu, atol=1e-12)
            assert np.allclose(s.edge_marginals, mu2, atol=1e-12)

    def test_log_pmf_normalizes(self, rng):
        m = random_model(rng, 5)
        states, logp, phi = log_probabilities(m)
        assert np.exp(logp).sum() == pytest.approx(1.0, abs=1e-12)
        assert log_pmf(m, states[7], phi) == pytest.approx(logp[7], abs=1e-12)

    def test_cutoff(self):
        with pytest.raises(EnumerationLimitError):
            exact_summary(IsingModel.uniform(ENUMERATION_CUTOFF + 1))

    def test_covariances(self):
        m = IsingModel.from_edges(2, [(0, 1, 0.5)], [0.3, 0.3])
        s = exact_summary(m)
        assert s.edge_marginals[0, 1] == pytest.approx(0.5263389371547539, abs=1e-12)
        assert s.node_marginals[0] == pytest.approx(0.40985983264560094, abs=1e-12)
        assert s.covariances[0, 1] == pytest.approx(0.5263389371547539 - 0.40985983264560094**2, abs=1e-12)


class TestDivergences:
    def test_single_edge_pair(self):
        p, q = SINGLE_EDGE, IsingModel.from_edges(2, [(0, 1, 0.3)])
        assert skl_direct(p, q) == pytest.approx(0.034160908961683764, abs=1e-12)
        assert tv_direct(p, q) == pytest.approx(0.08540227240420944, abs=1e-12)

    def test_against_uniform(self):
        assert skl_direct(SINGLE_EDGE, IsingModel.uniform(2)) == pytest.approx(0.5 * math.tanh(0.5), abs=1e-12)

    def test_single_node_field(self):
        p = IsingModel(np.zeros((1, 1)), np.array([0.4]))
        q = IsingModel.uniform(1)
        assert skl_direct(p, q) == pytest.approx(0.4 * math.tanh(0.4), abs=1e-12)
        assert tv_direct(p, q) == pytest.approx(math.tanh(0.4) / 2, abs=1e-12)

    def test_product_fields(self):
        p = IsingModel(np.zeros((4, 4)), np.full(4, 0.3))
        assert skl_direct(p, IsingModel.uniform(4)) == pytest.approx(0.34957513494190906, abs=1e-12)

    def test_moment_formula_matches_brute_force(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 6))
            p, q = random_model(rng, n), random_model(rng, n)
            got = skl_divergence(p, exact_summary(p), q, exact_summary(q))
            assert got == pytest.approx(brute_skl(p, q), abs=1e-10)

    def test_self_distance_zero(self, rng):
        m = random_model(rng, 5)
        assert skl_direct(m, m) == 0.0
        assert tv_direct(m, m) == 0.0

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            skl_direct(IsingModel.uniform(2), IsingModel.uniform(3))

    def test_incomplete_moments_rejected(self):
        class Partial:
            node_marginals = np.zeros(2)
            edge_marginals = np.full((2, 2), np.nan)

        with pytest.raises(ValueError, match="incomplete"):
            skl_divergence(SINGLE_EDGE, Partial(), SINGLE_EDGE, exact_summary(SINGLE_EDGE))

    def test_independence_gap_zero_field_equals_distance_to_products(self):
        m = complete_model(4, 0.2, alternating=True)
        s = exact_summary(m)
        best, fields = skl_to_product_set(m, s)
        assert best == pytest.approx(skl_independence_gap(m, s), abs=1e-9)
        assert np.allclose(fields, 0.0, atol=1e-6)

    def test_product_set_distance_is_a_lower_bound(self, rng):
        # any particular product model is at least as far as the minimizer
        for _ in range(5):
            m = random_model(rng, 4, h_max=0.5)
            best, fields = skl_to_product_set(m, exact_summary(m))
            prod = IsingModel(np.zeros((4, 4)), fields)
            assert skl_direct(m, prod) == pytest.approx(best, abs=1e-8)
            other = IsingModel(np.zeros((4, 4)), fields + rng.normal(0, 0.1, 4))
            assert skl_direct(m, other) >= best - 1e-9


class TestDobrushinAndClasses:
    def test_path_sum(self):
        assert dobrushin_sum(path_model(4, 0.2)) == pytest.approx(0.394750640449808, abs=1e-12)

    def test_check(self):
        assert dobrushin_check(path_model(4, 0.2), 0.05)
        assert not dobrushin_check(IsingModel.from_edges(2, [(0, 1, 2.0)]), 0.05)
        assert dobrushin_sum(IsingModel.from_edges(2, [(0, 1, 2.0)])) == pytest.approx(0.9640275800758169)

    def test_classify(self, rng):
        assert classify_model(path_model(5, 0.3)) == (True, True, True)
        assert classify_model(complete_model(4, 0.3)).is_forest is False
        assert classify_model(star_model(4, -0.3, field=0.1)) == (True, False, False)
        assert is_forest(random_forest(rng, 9))


class TestTesterConfig:
    def test_defaults_roundtrip(self):
        c = TesterConfig(0.5)
        assert c.to_dict()["epsilon"] == 0.5 and c.fail_prob == 0.1

    @pytest.mark.parametrize("kw", [{"epsilon": 0}, {"epsilon": 1, "fail_prob": 1.0}, {"epsilon": 1, "c_loc": -1}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            TesterConfig(**kw)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_skl_nonnegative_and_symmetric(n, seed):
    r = np.random.default_rng(seed)
    p, q = random_model(r, n), random_model(r, n)
    d = skl_direct(p, q)
    assert d >= -1e-12
    assert d == pytest.approx(skl_direct(q, p), abs=1e-12)
    assert 2 * tv_direct(p, q) ** 2 <= d + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
def test_forest_edge_marginals_are_tanh(seed, n):
    m = random_forest(np.random.default_rng(seed), n)
    s = exact_summary(m)
    for u, v, t in m.edges():
        assert s.edge_marginals[u, v] == pytest.approx(math.tanh(t), abs=1e-10)
