"""Quality metrics: held-out likelihood, coherence against a direct
double-loop count, compactness, and the aggregate report."""

import math

import numpy as np
import pytest

from conftest import bern, lcm_generator, sample_data
from hlta.corpus import BinaryData
from hlta.evaluation import (
    coherence,
    compactness,
    evaluate_run,
    heldout_per_doc_ll,
    load_embeddings,
)
from hlta.model import LatentTreeModel, OBSERVED, Variable, make_lcm
from hlta.topics import extract_hierarchy


def corpus_from_sets(doc_sets, vocab):
    bits = np.zeros((len(doc_sets), len(vocab)), dtype=np.uint8)
    for i, present in enumerate(doc_sets):
        for w in present:
            bits[i, vocab.index(w)] = 1
    return BinaryData(tuple(vocab), bits)


class TestHeldoutPerDocLl:
    def test_independence_closed_form(self):
        ps = [0.3, 0.8]
        conds = {f"x{i}": np.array([[1 - p, p], [1 - p, p]]) for i, p in enumerate(ps)}
        m = make_lcm("Y", list(conds), bern(0.5), conds)
        data = corpus_from_sets([{"x0"}, {"x1"}, {"x0", "x1"}], ["x0", "x1"])
        expect = (math.log(0.3) + math.log(0.2)
                  + math.log(0.7) + math.log(0.8)
                  + math.log(0.3) + math.log(0.8)) / 3
        assert heldout_per_doc_ll(m, data) == pytest.approx(expect, abs=1e-12)

    def test_certain_model_scores_zero(self):
        m = LatentTreeModel({"x": Variable("x", OBSERVED, 0)}, {"x": None},
                            {"x": bern(1.0)}, "x")
        data = BinaryData(("x",), np.ones((5, 1), dtype=np.uint8))
        assert heldout_per_doc_ll(m, data) == 0.0

    def test_never_positive(self):
        gen = lcm_generator(["a", "b", "c"])
        data = sample_data(gen, 200, 0)
        assert heldout_per_doc_ll(gen, data) <= 0.0

    def test_shard_weighted_combination(self):
        gen = lcm_generator(["a", "b", "c"])
        data = sample_data(gen, 300, 1)
        first = BinaryData(data.variables, data.bits[:100])
        second = BinaryData(data.variables, data.bits[100:])
        combined = heldout_per_doc_ll(gen, data)
        weighted = (100 * heldout_per_doc_ll(gen, first)
                    + 200 * heldout_per_doc_ll(gen, second)) / 300
        assert combined == pytest.approx(weighted, abs=1e-10)

    def test_empty_rejected(self):
        gen = lcm_generator(["a", "b", "c"])
        with pytest.raises(ValueError):
            heldout_per_doc_ll(gen, BinaryData(("a", "b", "c"),
                                               np.zeros((0, 3), dtype=np.uint8)))


class TestCoherence:
    def test_full_cooccurrence_scores_zero(self):
        # w2 appears in 4 docs; w1 co-occurs in 3 of them plus once alone:
        # term = ln((3 + 1) / 4) = 0.
        docs = [{"w1", "w2"}, {"w1", "w2"}, {"w1", "w2"}, {"w2"}, {"w1"}]
        data = corpus_from_sets(docs, ["w1", "w2"])
        assert coherence(["w1", "w2"], data) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_words(self):
        docs = [{"w1"}] * 10 + [{"w2"}] * 3
        data = corpus_from_sets(docs, ["w1", "w2"])
        assert coherence(["w1", "w2"], data) == pytest.approx(math.log(1 / 10),
                                                              abs=1e-12)

    def test_single_word_empty_sum(self):
        data = corpus_from_sets([{"w1"}], ["w1"])
        assert coherence(["w1"], data) == 0.0

    def test_absent_word_rejected(self):
        data = corpus_from_sets([{"w1"}, set()], ["w1", "w2"])
        with pytest.raises(ValueError):
            coherence(["w1", "w2"], data)

    def test_order_dependence_matches_double_loop(self):
        rng = np.random.default_rng(0)
        vocab = [f"w{i}" for i in range(4)]
        docs = [{w for w in vocab if rng.random() < 0.5} or {"w0"}
                for _ in range(12)]
        data = corpus_from_sets(docs, vocab)

        def oracle(words):
            total = 0.0
            for i in range(1, len(words)):
                for j in range(i):
                    dj = sum(words[j] in d for d in docs)
                    dij = sum(words[i] in d and words[j] in d for d in docs)
                    total += math.log((dij + 1) / dj)
            return total

        assert coherence(vocab, data) == pytest.approx(oracle(vocab), abs=1e-12)
        reordered = list(reversed(vocab))
        assert coherence(reordered, data) == pytest.approx(oracle(reordered),
                                                           abs=1e-12)


class TestCompactness:
    def test_identical_vectors(self):
        emb = {w: np.array([1.0, 2.0, 3.0]) for w in ("a", "b", "c")}
        assert compactness(["a", "b", "c"], emb) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_vectors(self):
        emb = {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])}
        assert compactness(["a", "b"], emb) == pytest.approx(0.0, abs=1e-12)

    def test_missing_vector_skipped(self):
        emb = {"a": np.array([1.0, 0.0]), "b": np.array([1.0, 0.0])}
        assert compactness(["a", "b", "zzz"], emb) == pytest.approx(1.0, abs=1e-12)

    def test_fewer_than_two_vectors_undefined(self):
        emb = {"a": np.array([1.0, 0.0])}
        assert compactness(["a", "zzz"], emb) is None

    def test_bounded(self):
        rng = np.random.default_rng(1)
        emb = {f"w{i}": rng.normal(size=8) for i in range(5)}
        score = compactness(list(emb), emb)
        assert -1.0 - 1e-12 <= score <= 1.0 + 1e-12


class TestLoadEmbeddings:
    def test_plain_and_header_formats(self, tmp_path):
        p1 = tmp_path / "plain.vec"
        p1.write_text("apple 1.0 2.0\nbanana 3.0 4.0\n")
        e1 = load_embeddings(p1)
        assert set(e1) == {"apple", "banana"}
        p2 = tmp_path / "header.vec"
        p2.write_text("2 2\napple 1.0 2.0\nbanana 3.0 4.0\n")
        e2 = load_embeddings(p2)
        assert np.allclose(e1["apple"], e2["apple"])

    def test_restriction(self, tmp_path):
        p = tmp_path / "v.vec"
        p.write_text("apple 1 2\nbanana 3 4\n")
        assert set(load_embeddings(p, restrict_to={"apple"})) == {"apple"}


class TestEvaluateRun:
    def _setup(self):
        gen = lcm_generator(["a", "b", "c", "d"], prior=0.4)
        data = sample_data(gen, 400, 0)
        h = extract_hierarchy(gen)
        return gen, data, h

    def test_report_fields(self):
        gen, data, h = self._setup()
        emb = {w: np.ones(3) for w in "abcd"}
        report = evaluate_run(gen, data, h, embeddings=emb)
        assert set(report) >= {"per_doc_ll", "mean_coherence", "mean_compactness",
                               "n_topics", "topics"}
        assert report["mean_compactness"] == pytest.approx(1.0)

    def test_compactness_null_without_embeddings(self):
        gen, data, h = self._setup()
        report = evaluate_run(gen, data, h)
        assert report["mean_compactness"] is None

    def test_means_are_arithmetic(self):
        gen, data, h = self._setup()
        report = evaluate_run(gen, data, h)
        per = [t["coherence"] for t in report["topics"]]
        assert report["mean_coherence"] == pytest.approx(float(np.mean(per)))

    def test_deterministic(self):
        gen, data, h = self._setup()
        assert evaluate_run(gen, data, h) == evaluate_run(gen, data, h)
