"""Pure-numpy message passing, vectorized across documents.

This backend is the reference implementation: it handles zero probability
entries exactly (needed for hand-built deterministic models), while the
compiled backend assumes strictly positive tables as produced by learning.
"""

from __future__ import annotations

import numpy as np

_EYE2 = np.eye(2)

# Documents per chunk; bounds the (n_nodes, chunk, 2) work arrays.
CHUNK = 4096


def _upward(ct, bits):
    """One upward pass for a chunk of documents.

    Returns (lam, msg, logscale): `lam[v]` is the likelihood of the evidence
    below node v given its state (one-hot for observed nodes), `msg[v]` the
    message v sends to its parent, `logscale` the per-document log of the
    normalization constants absorbed along the way.
    """
    n_nodes = ct.n_nodes
    n_docs = bits.shape[0]
    lam = np.ones((n_nodes, n_docs, 2))
    msg = np.empty((n_nodes, n_docs, 2))
    logscale = np.zeros(n_docs)
    for v in range(n_nodes - 1, -1, -1):
        if not ct.is_latent[v]:
            lam[v] = _EYE2[bits[:, ct.obs_col[v]]]
        elif ct.child_start[v] < ct.child_start[v + 1]:
            scale = lam[v].sum(axis=1)
            safe = np.where(scale > 0, scale, 1.0)
            lam[v] /= safe[:, None]
            with np.errstate(divide="ignore"):
                logscale += np.log(scale)
        if v == 0:
            break
        if ct.is_latent[v]:
            msg[v] = lam[v] @ ct.cpt[v].T
        else:
            msg[v] = ct.cpt[v].T[bits[:, ct.obs_col[v]]]
        lam[ct.parent[v]] *= msg[v]
    return lam, msg, logscale


def _chunk_ll(ct, bits):
    lam, _, logscale = _upward(ct, bits)
    prior = ct.cpt[0, 0]
    with np.errstate(divide="ignore"):
        return logscale + np.log((lam[0] * prior).sum(axis=1))


def _normalize_rows(arr):
    total = arr.sum(axis=-1, keepdims=True)
    return np.divide(arr, total, out=np.full_like(arr, 0.5), where=total > 0)


def _pi_excluding(ct, pi_p, lam, msg, bits, p, v):
    """pi message from parent p toward child v, robust to zero entries."""
    denom = msg[v]
    num = pi_p * lam[p]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    bad = denom <= 0
    if bad.any():
        prod = pi_p.copy()
        if not ct.is_latent[p]:
            prod = prod * _EYE2[bits[:, ct.obs_col[p]]]
        for c in ct.children_of(p):
            if c != v:
                prod = prod * msg[c]
        t = np.where(bad, prod, t)
    return t


def _downward(ct, bits, lam, msg):
    """Yield (v, pair) for every non-root node, where `pair[d, j, k]` is
    P(v = k, parent(v) = j | doc d).  Also returns the root posterior."""
    n_nodes = ct.n_nodes
    n_docs = bits.shape[0]
    pi = np.empty((n_nodes, n_docs, 2))
    pi[0] = ct.cpt[0, 0]
    root_post = _normalize_rows(lam[0] * ct.cpt[0, 0])
    pairs = []
    for v in range(1, n_nodes):
        p = ct.parent[v]
        t = _pi_excluding(ct, pi[p], lam, msg, bits, p, v)
        pair = ct.cpt[v][None, :, :] * t[:, :, None] * lam[v][:, None, :]
        total = pair.sum(axis=(1, 2), keepdims=True)
        pair = np.divide(pair, total, out=pair, where=total > 0)
        if ct.is_latent[v]:
            pi[v] = _normalize_rows(t @ ct.cpt[v])
        pairs.append(pair)
    return root_post, pairs


def loglik(ct, bits):
    """Per-document log-likelihood, shape (n_docs,)."""
    out = np.empty(bits.shape[0])
    for lo in range(0, bits.shape[0], CHUNK):
        out[lo : lo + CHUNK] = _chunk_ll(ct, bits[lo : lo + CHUNK])
    return out


def estep(ct, bits, weights):
    """Weighted expected counts for every table cell.

    Returns (total_ll, suff) where suff has shape (n_nodes, 2, 2); the root
    counts sit in suff[0, 0, :].
    """
    suff = np.zeros((ct.n_nodes, 2, 2))
    total_ll = 0.0
    for lo in range(0, bits.shape[0], CHUNK):
        b = bits[lo : lo + CHUNK]
        w = weights[lo : lo + CHUNK]
        lam, msg, logscale = _upward(ct, b)
        prior = ct.cpt[0, 0]
        with np.errstate(divide="ignore"):
            ll = logscale + np.log((lam[0] * prior).sum(axis=1))
        total_ll += float(ll @ w) if np.isfinite(ll).all() else float((ll * w).sum())
        root_post, pairs = _downward(ct, b, lam, msg)
        suff[0, 0] += w @ root_post
        for v, pair in zip(range(1, ct.n_nodes), pairs):
            suff[v] += np.einsum("n,njk->jk", w, pair)
    return total_ll, suff


def posteriors(ct, bits, node_idx):
    """Posterior marginals P(node | doc) for the requested node indices.

    Returns an array of shape (n_docs, len(node_idx), 2).
    """
    node_idx = list(node_idx)
    out = np.empty((bits.shape[0], len(node_idx), 2))
    want = set(node_idx)
    pos = {v: i for i, v in enumerate(node_idx)}
    for lo in range(0, bits.shape[0], CHUNK):
        b = bits[lo : lo + CHUNK]
        lam, msg, _ = _upward(ct, b)
        root_post, pairs = _downward(ct, b, lam, msg)
        if 0 in want:
            out[lo : lo + CHUNK, pos[0]] = root_post
        for v, pair in zip(range(1, ct.n_nodes), pairs):
            if v in want:
                out[lo : lo + CHUNK, pos[v]] = pair.sum(axis=1)
    return out


def pairwise_tables(ct, bits):
    """Per-document pairwise posteriors P(v, parent(v) | doc) for all v.

    Returns (root_post, pair) with pair shaped (n_docs, n_nodes, 2, 2);
    pair[:, 0] is unused.  Intended for small models and test oracles.
    """
    n_docs = bits.shape[0]
    pair_out = np.zeros((n_docs, ct.n_nodes, 2, 2))
    root_out = np.empty((n_docs, 2))
    for lo in range(0, n_docs, CHUNK):
        b = bits[lo : lo + CHUNK]
        lam, msg, _ = _upward(ct, b)
        root_post, pairs = _downward(ct, b, lam, msg)
        root_out[lo : lo + CHUNK] = root_post
        for v, pair in zip(range(1, ct.n_nodes), pairs):
            pair_out[lo : lo + CHUNK, v] = pair
    return root_out, pair_out
