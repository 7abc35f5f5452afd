"""Backend selection and equivalence of the compiled kernel with the numpy
fallback, plus the zero-probability slow path."""

import math

import numpy as np
import pytest

from conftest import bern, random_ltm, table
from hlta import _backend, inference
from hlta._backend import HAVE_EXT, compile_tree, numpy_ops
from hlta.model import make_lcm

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")


def _random_case(rng, n_docs=60):
    m = random_ltm(rng, p_range=(0.02, 0.98))
    bits = rng.integers(0, 2, size=(n_docs, len(m.observed_names))).astype(np.uint8)
    weights = rng.uniform(0.5, 3.0, n_docs)
    return m, bits, weights


@needs_ext
class TestBackendEquivalence:
    def test_loglik_estep_posteriors_agree(self):
        rng = np.random.default_rng(0)
        from hlta._backend import _core

        for _ in range(40):
            m, bits, w = _random_case(rng)
            ct = compile_tree(m)
            args = (ct.parent, ct.is_latent, ct.obs_col, ct.cpt,
                    ct.child_start, ct.child_list)
            assert np.allclose(numpy_ops.loglik(ct, bits),
                               _core.loglik(*args, bits), atol=1e-10)
            ll_n, s_n = numpy_ops.estep(ct, bits, w)
            ll_c, s_c = _core.estep(*args, bits, w)
            assert ll_c == pytest.approx(ll_n, abs=1e-8)
            assert np.allclose(s_n, s_c, atol=1e-10)
            idx = np.arange(ct.n_nodes, dtype=np.int32)
            assert np.allclose(numpy_ops.posteriors(ct, bits, idx),
                               _core.posteriors(*args, bits, idx), atol=1e-10)

    def test_dispatcher_prefers_extension(self, monkeypatch):
        monkeypatch.delenv("HLTA_BACKEND", raising=False)
        assert _backend.active_backend() == "cython"
        monkeypatch.setenv("HLTA_BACKEND", "numpy")
        assert _backend.active_backend() == "numpy"

    def test_dispatch_same_results_both_ways(self, monkeypatch):
        rng = np.random.default_rng(3)
        m, bits, w = _random_case(rng)
        ct = compile_tree(m)
        monkeypatch.setenv("HLTA_BACKEND", "numpy")
        ll_np = _backend.loglik(ct, bits)
        monkeypatch.delenv("HLTA_BACKEND")
        ll_cy = _backend.loglik(ct, bits)
        assert np.allclose(ll_np, ll_cy, atol=1e-10)


class TestZeroProbabilityPath:
    def _deterministic_model(self):
        # Two deterministic children force zero messages; posteriors must
        # still match enumeration.
        conds = {"a": np.eye(2), "b": np.eye(2), "c": table(0.3, 0.6)}
        return make_lcm("Y", ["a", "b", "c"], bern(0.4), conds)

    def test_zero_messages_match_brute_force(self):
        m = self._deterministic_model()
        doc = {"a": 1, "b": 1, "c": 0}
        bf = inference.brute_force_posteriors(m, doc)
        for v in m.variables:
            assert np.allclose(inference.posterior_marginal(m, doc, v),
                               bf.marginals[v], atol=1e-12)
        pairs = inference.pairwise_posterior(m, doc)
        for v, t in pairs.items():
            assert np.allclose(t, bf.pairwise[v], atol=1e-12)

    def test_impossible_evidence_gives_minus_inf(self):
        m = self._deterministic_model()
        assert inference.doc_log_likelihood(m, {"a": 1, "b": 0, "c": 0}) == -math.inf

    def test_dispatcher_falls_back_on_zero_tables(self):
        # cpt contains exact zeros, so the compiled kernel must not be used
        # even when available; the call still succeeds.
        m = self._deterministic_model()
        ct = compile_tree(m)
        bits = np.array([[1, 1, 0], [0, 0, 1]], dtype=np.uint8)
        ll = _backend.loglik(ct, bits)
        assert np.isfinite(ll).all()


class TestChunking:
    def test_results_stable_across_chunk_sizes(self, monkeypatch):
        rng = np.random.default_rng(7)
        m, bits, w = _random_case(rng, n_docs=150)
        ct = compile_tree(m)
        ll_big, suff_big = numpy_ops.estep(ct, bits, w)
        monkeypatch.setattr(numpy_ops, "CHUNK", 32)
        ll_small, suff_small = numpy_ops.estep(ct, bits, w)
        assert ll_small == pytest.approx(ll_big, abs=1e-9)
        assert np.allclose(suff_big, suff_small, atol=1e-10)
