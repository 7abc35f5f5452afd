"""Inference: message passing against the enumeration oracle, BIC, and the
projected-data equivalence."""

import math

import numpy as np
import pytest

from conftest import bern, random_ltm, table
from hlta import inference
from hlta.corpus import BinaryData, project
from hlta.model import (
    LATENT,
    OBSERVED,
    LatentTreeModel,
    Variable,
    make_lcm,
    reroot,
    sample,
)


def single_var_model(p=0.75):
    return LatentTreeModel({"x": Variable("x", OBSERVED, 0)}, {"x": None},
                           {"x": bern(p)}, "x")


def independence_model(ps):
    """One uninformative latent with conditionally identical children."""
    conds = {f"x{i}": np.array([[1 - p, p], [1 - p, p]]) for i, p in enumerate(ps)}
    return make_lcm("Y", list(conds), bern(0.5), conds)


class TestDocLogLikelihood:
    def test_single_variable(self):
        m = single_var_model(0.75)
        assert inference.doc_log_likelihood(m, {"x": 1}) == pytest.approx(math.log(0.75))
        assert inference.doc_log_likelihood(m, {"x": 0}) == pytest.approx(math.log(0.25))

    def test_factorized_model_sums_marginals(self):
        ps = [0.2, 0.6, 0.9]
        m = independence_model(ps)
        doc = {"x0": 1, "x1": 0, "x2": 1}
        expect = math.log(0.2) + math.log(0.4) + math.log(0.9)
        assert inference.doc_log_likelihood(m, doc) == pytest.approx(expect, abs=1e-12)

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            m = random_ltm(rng)
            doc = {x: int(rng.integers(0, 2)) for x in m.observed_names}
            bf = inference.brute_force_posteriors(m, doc)
            assert inference.doc_log_likelihood(m, doc) == pytest.approx(
                bf.log_likelihood, abs=1e-10)

    def test_zero_probability_evidence(self):
        m = single_var_model(1.0)
        assert inference.doc_log_likelihood(m, {"x": 0}) == -math.inf

    def test_reroot_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            m = random_ltm(rng, n_latent=3, n_obs=5)
            doc = {x: int(rng.integers(0, 2)) for x in m.observed_names}
            lls = {inference.doc_log_likelihood(reroot(m, z), doc)
                   for z in m.latent_names}
            assert max(lls) - min(lls) < 1e-10


class TestPosteriorMarginal:
    def test_uninformative_evidence_returns_prior(self):
        m = independence_model([0.3, 0.7])
        post = inference.posterior_marginal(m, {"x0": 1, "x1": 0}, "Y")
        assert np.allclose(post, [0.5, 0.5], atol=1e-12)

    def test_deterministic_child(self):
        m = make_lcm("Y", ["a", "b", "c"], bern(0.5),
                     {"a": np.eye(2), "b": table(0.4, 0.6), "c": table(0.4, 0.6)})
        post = inference.posterior_marginal(m, {"a": 1, "b": 0, "c": 1}, "Y")
        assert post[1] == pytest.approx(1.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            m = random_ltm(rng)
            doc = {x: int(rng.integers(0, 2)) for x in m.observed_names}
            bf = inference.brute_force_posteriors(m, doc)
            for v in m.variables:
                got = inference.posterior_marginal(m, doc, v)
                assert np.allclose(got, bf.marginals[v], atol=1e-10)
                assert got.sum() == pytest.approx(1.0, abs=1e-12)


class TestPairwisePosterior:
    def test_no_evidence_equals_prior_joint(self):
        # The latent pair is unaffected by uninformative children.
        variables = {
            "Y": Variable("Y", LATENT, 2),
            "Z": Variable("Z", LATENT, 1),
            "x": Variable("x", OBSERVED, 0),
        }
        parent = {"Y": None, "Z": "Y", "x": "Z"}
        cpts = {"Y": bern(0.3), "Z": table(0.2, 0.9), "x": np.full((2, 2), 0.5)}
        m = LatentTreeModel(variables, parent, cpts, "Y")
        pair = inference.pairwise_posterior(m, {"x": 1})["Z"]
        expect = np.array([0.7, 0.3])[:, None] * cpts["Z"]
        assert np.allclose(pair, expect, atol=1e-12)

    def test_point_mass_under_deterministic_tables(self):
        m = make_lcm("Y", ["a", "b", "c"], bern(0.5),
                     {w: np.eye(2) for w in "abc"})
        pair = inference.pairwise_posterior(m, {"a": 1, "b": 1, "c": 1})["a"]
        expect = np.zeros((2, 2))
        expect[1, 1] = 1.0
        assert np.allclose(pair, expect, atol=1e-12)

    def test_matches_brute_force_and_marginalizes(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = random_ltm(rng)
            doc = {x: int(rng.integers(0, 2)) for x in m.observed_names}
            bf = inference.brute_force_posteriors(m, doc)
            pairs = inference.pairwise_posterior(m, doc)
            for v, got in pairs.items():
                assert np.allclose(got, bf.pairwise[v], atol=1e-10)
                assert got.sum() == pytest.approx(1.0, abs=1e-10)
                assert np.allclose(got.sum(axis=0), bf.marginals[v], atol=1e-10)


class TestBic:
    def test_hand_value(self):
        # MLE p = 3/4 on data [1, 1, 1, 0]; d = 1 free parameter.
        m = single_var_model(0.75)
        data = BinaryData(("x",), np.array([[1], [1], [1], [0]], dtype=np.uint8))
        expect = 3 * math.log(0.75) + math.log(0.25) - 0.5 * math.log(4)
        assert inference.bic(m, data) == pytest.approx(expect, abs=1e-12)

    def test_single_document_no_penalty(self):
        m = single_var_model(0.6)
        data = BinaryData(("x",), np.array([[1]], dtype=np.uint8))
        assert inference.bic(m, data) == pytest.approx(math.log(0.6), abs=1e-12)

    def test_empty_data_rejected(self):
        m = single_var_model()
        data = BinaryData(("x",), np.zeros((0, 1), dtype=np.uint8))
        with pytest.raises(ValueError):
            inference.bic(m, data)


class TestProjectedEquivalence:
    def test_total_ll_matches_expanded(self):
        rng = np.random.default_rng(3)
        m = random_ltm(rng, n_latent=2, n_obs=4)
        _, bits = sample(m, 500, rng)
        data = BinaryData(tuple(m.observed_names), bits)
        pd = project(data, m.observed_names)
        ll_rows, w_rows = inference.log_likelihoods(m, data)
        ll_cases, w_cases = inference.log_likelihoods(m, pd)
        assert float(ll_cases @ w_cases) == pytest.approx(float(ll_rows @ w_rows),
                                                          abs=1e-9)
        assert inference.bic(m, pd) == pytest.approx(inference.bic(m, data), abs=1e-9)


class TestBruteForceOracle:
    def test_independence_model_self_check(self):
        ps = [0.25, 0.5, 0.8]
        m = independence_model(ps)
        doc = {"x0": 1, "x1": 1, "x2": 0}
        bf = inference.brute_force_posteriors(m, doc)
        assert np.allclose(bf.marginals["Y"], [0.5, 0.5], atol=1e-12)
        assert bf.log_likelihood == pytest.approx(
            math.log(0.25) + math.log(0.5) + math.log(0.2), abs=1e-12)

    def test_single_edge_model_self_check(self):
        m = make_lcm("Y", ["a", "b", "c"], bern(0.4),
                     {w: table(0.2, 0.9) for w in "abc"})
        doc = {"a": 1, "b": 1, "c": 1}
        bf = inference.brute_force_posteriors(m, doc)
        # P(Y=1 | all ones) by Bayes, computed directly.
        p1 = 0.4 * 0.9 ** 3
        p0 = 0.6 * 0.2 ** 3
        assert bf.marginals["Y"][1] == pytest.approx(p1 / (p0 + p1), abs=1e-12)

    def test_size_cap(self):
        rng = np.random.default_rng(0)
        m = random_ltm(rng, n_latent=4, n_obs=17)
        with pytest.raises(ValueError):
            inference.brute_force_posteriors(m, {x: 0 for x in m.observed_names})
