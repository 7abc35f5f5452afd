"""Exact inference on tree models: log-likelihoods, posterior marginals,
pairwise posteriors, BIC scoring, and a brute-force enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .corpus import evidence_matrix
from .model import LATENT, LatentTreeModel, free_param_count


def _doc_row(model: LatentTreeModel, doc_bits) -> np.ndarray:
    obs = model.observed_names
    if isinstance(doc_bits, dict):
        missing = [n for n in obs if n not in doc_bits]
        if missing:
            raise ValueError(f"document misses observed variables: {missing}")
        row = [int(doc_bits[n]) for n in obs]
    else:
        row = [int(b) for b in doc_bits]
        if len(row) != len(obs):
            raise ValueError(f"expected {len(obs)} observed values, got {len(row)}")
    return np.asarray([row], dtype=np.uint8)


def doc_log_likelihood(model: LatentTreeModel, doc_bits) -> float:
    """log P(doc) with all latent variables summed out."""
    ct = _backend.compile_tree(model)
    return float(_backend.loglik(ct, _doc_row(model, doc_bits))[0])


def log_likelihoods(model: LatentTreeModel, data) -> tuple[np.ndarray, np.ndarray]:
    """Per-case log-likelihood and case weights for any supported data form."""
    ct = _backend.compile_tree(model)
    bits, weights = evidence_matrix(data, model.observed_names)
    return _backend.loglik(ct, bits), weights


def total_log_likelihood(model: LatentTreeModel, data) -> float:
    ll, w = log_likelihoods(model, data)
    return float(ll @ w)


def posterior_marginal(model: LatentTreeModel, doc_bits, var: str) -> np.ndarray:
    """P(var | doc); a length-2 distribution."""
    ct = _backend.compile_tree(model)
    out = _backend.posteriors(ct, _doc_row(model, doc_bits), [ct.index[var]])
    return out[0, 0]


def posterior_marginals(model: LatentTreeModel, data, names) -> np.ndarray:
    """P(name | doc) for every doc and requested name; (n_docs, len(names), 2)."""
    ct = _backend.compile_tree(model)
    bits, _ = evidence_matrix(data, model.observed_names)
    return _backend.posteriors(ct, bits, [ct.index[n] for n in names])


def pairwise_posterior(model: LatentTreeModel, doc_bits) -> dict[str, np.ndarray]:
    """P(v, parent(v) | doc) for every non-root v, rows indexed by the parent."""
    ct = _backend.compile_tree(model)
    _, pair = _backend.pairwise_tables(ct, _doc_row(model, doc_bits))
    return {ct.names[v]: pair[0, v] for v in range(1, ct.n_nodes)}


def bic(model: LatentTreeModel, data) -> float:
    """log P(data | model, theta) - d/2 * ln(sample size)."""
    ll, w = log_likelihoods(model, data)
    n = float(w.sum())
    if n <= 0:
        raise ValueError("BIC needs a nonempty dataset")
    return float(ll @ w) - free_param_count(model) / 2.0 * math.log(n)


@dataclass
class BruteForceResult:
    log_likelihood: float
    marginals: dict[str, np.ndarray]
    pairwise: dict[str, np.ndarray]


def brute_force_posteriors(model: LatentTreeModel, doc_bits) -> BruteForceResult:
    """Test oracle: exact enumeration over all latent assignments.

    Produces the document log-likelihood, the posterior marginal of every
    variable, and the pairwise posterior P(v, parent(v) | doc) for every
    non-root v.
    """
    if len(model.variables) > 20:
        raise ValueError("brute force enumeration is limited to 20 variables")
    obs = model.observed_names
    row = _doc_row(model, doc_bits)[0]
    fixed = dict(zip(obs, (int(b) for b in row)))
    latents = [n for n, v in model.variables.items() if v.kind == LATENT]
    m = len(latents)
    combos = np.indices((2,) * m).reshape(m, -1).T if m else np.zeros((1, 0), int)
    values = {name: np.full(combos.shape[0], fixed[name]) for name in obs}
    for j, name in enumerate(latents):
        values[name] = combos[:, j]
    weight = np.ones(combos.shape[0])
    for name in model.variables:
        pa = model.parent[name]
        table = model.cpts[name]
        if pa is None:
            weight = weight * table[values[name]]
        else:
            weight = weight * table[values[pa], values[name]]
    total = weight.sum()
    ll = math.log(total) if total > 0 else -math.inf
    post = weight / total if total > 0 else np.full_like(weight, 0.0)
    marg = {}
    for name in model.variables:
        marg[name] = np.array([post[values[name] == k].sum() for k in (0, 1)])
    pair = {}
    for name in model.variables:
        pa = model.parent[name]
        if pa is None:
            continue
        table = np.zeros((2, 2))
        for j in (0, 1):
            for k in (0, 1):
                table[j, k] = post[(values[pa] == j) & (values[name] == k)].sum()
        pair[name] = table
    return BruteForceResult(ll, marg, pair)
