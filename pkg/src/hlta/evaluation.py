"""Model and topic quality metrics: held-out per-document log-likelihood,
topic coherence from document co-occurrence counts, and embedding-based
topic compactness."""

from __future__ import annotations

import math

import numpy as np

from .corpus import as_binary_data
from .inference import log_likelihoods
from .model import LatentTreeModel
from .topics import TopicHierarchy


def heldout_per_doc_ll(model: LatentTreeModel, test_data) -> float:
    """Average log-likelihood per held-out document."""
    ll, w = log_likelihoods(model, test_data)
    n = float(w.sum())
    if n <= 0:
        raise ValueError("the test set is empty")
    return float(ll @ w) / n


def _doc_counts(data, words):
    bd = as_binary_data(data)
    cols = bd.columns(words).astype(np.int64)
    single = cols.sum(axis=0)
    joint = cols.T @ cols
    return single, joint


def coherence(topic_words, data) -> float:
    """Co-occurrence coherence of an ordered word list:
    sum over i=2..M, j<i of ln((D(w_i, w_j) + 1) / D(w_j))."""
    words = list(topic_words)
    if len(words) < 2:
        return 0.0
    single, joint = _doc_counts(data, words)
    for w, d in zip(words, single):
        if d == 0:
            raise ValueError(f"word {w!r} occurs in no document")
    total = 0.0
    for i in range(1, len(words)):
        for j in range(i):
            total += math.log((joint[i, j] + 1) / single[j])
    return total


def compactness(topic_words, embeddings) -> float | None:
    """Mean pairwise cosine similarity of the words' embedding vectors.

    Words without a vector are skipped; with fewer than two vectors the
    score is undefined and None is returned.
    """
    vectors = []
    for w in topic_words:
        v = embeddings.get(w)
        if v is not None:
            vectors.append(np.asarray(v, dtype=float))
    if len(vectors) < 2:
        return None
    total = 0.0
    pairs = 0
    for i in range(1, len(vectors)):
        for j in range(i):
            a, b = vectors[i], vectors[j]
            denom = np.linalg.norm(a) * np.linalg.norm(b)
            total += float(a @ b / denom) if denom > 0 else 0.0
            pairs += 1
    return total / pairs


def load_embeddings(path, restrict_to=None) -> dict[str, np.ndarray]:
    """Text word-vector format: one `word v1 v2 ... vk` line per word; a
    leading `count dim` header line is tolerated."""
    keep = set(restrict_to) if restrict_to is not None else None
    out: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().split()
        if len(first) != 2 or not (first[0].isdigit() and first[1].isdigit()):
            _add_vector(out, first, keep)
        for line in fh:
            _add_vector(out, line.split(), keep)
    return out


def _add_vector(out, parts, keep):
    if len(parts) < 2:
        return
    word = parts[0]
    if keep is not None and word not in keep:
        return
    out[word] = np.asarray([float(x) for x in parts[1:]], dtype=float)


def evaluate_run(model: LatentTreeModel, test_data, hierarchy: TopicHierarchy,
                 coherence_data=None, embeddings=None, top_m: int = 4) -> dict:
    """Aggregate report: held-out per-document log-likelihood, mean topic
    coherence over the hierarchy's topics (top `top_m` words each), and
    mean compactness when embeddings are supplied."""
    coherence_data = coherence_data if coherence_data is not None else test_data
    per_topic = []
    coh_scores = []
    comp_scores = []
    for topic in hierarchy.all_topics():
        words = [w.word for w in topic.words[:top_m]]
        coh = coherence(words, coherence_data)
        coh_scores.append(coh)
        comp = compactness(words, embeddings) if embeddings is not None else None
        if comp is not None:
            comp_scores.append(comp)
        per_topic.append(
            {"latent": topic.latent, "level": topic.level, "size": topic.size,
             "coherence": coh, "compactness": comp}
        )
    return {
        "per_doc_ll": heldout_per_doc_ll(model, test_data),
        "mean_coherence": float(np.mean(coh_scores)) if coh_scores else None,
        "mean_compactness": float(np.mean(comp_scores)) if comp_scores else None,
        "n_topics": len(per_topic),
        "topics": per_topic,
    }
