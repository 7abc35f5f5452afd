# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled message-passing kernels.

Same contracts as `numpy_ops` for strictly positive tables (the dispatcher
falls back to numpy whenever a table contains a zero).  Each document is a
single C pass over the tree, which avoids the per-node array temporaries of
the vectorized fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


cdef double _upward(const int[::1] parent, const unsigned char[::1] is_latent,
                    const int[::1] obs_col, const double[:, :, ::1] cpt,
                    const unsigned char[:, ::1] bits, Py_ssize_t d,
                    double[:, ::1] lam, double[:, ::1] msg) noexcept nogil:
    cdef Py_ssize_t n_nodes = parent.shape[0]
    cdef Py_ssize_t v
    cdef int p, b
    cdef double s, m0, m1, total, logscale = 0.0
    for v in range(n_nodes):
        lam[v, 0] = 1.0
        lam[v, 1] = 1.0
    for v in range(n_nodes - 1, 0, -1):
        if is_latent[v]:
            s = lam[v, 0] + lam[v, 1]
            lam[v, 0] /= s
            lam[v, 1] /= s
            logscale += log(s)
            m0 = cpt[v, 0, 0] * lam[v, 0] + cpt[v, 0, 1] * lam[v, 1]
            m1 = cpt[v, 1, 0] * lam[v, 0] + cpt[v, 1, 1] * lam[v, 1]
        else:
            b = bits[d, obs_col[v]]
            m0 = cpt[v, 0, b]
            m1 = cpt[v, 1, b]
        msg[v, 0] = m0
        msg[v, 1] = m1
        p = parent[v]
        lam[p, 0] *= m0
        lam[p, 1] *= m1
    if is_latent[0]:
        s = lam[0, 0] + lam[0, 1]
        lam[0, 0] /= s
        lam[0, 1] /= s
        logscale += log(s)
        total = cpt[0, 0, 0] * lam[0, 0] + cpt[0, 0, 1] * lam[0, 1]
    else:
        b = bits[d, obs_col[0]]
        total = cpt[0, 0, b] * lam[0, b]
    return logscale + log(total)


def loglik(const int[::1] parent, const unsigned char[::1] is_latent,
           const int[::1] obs_col, const double[:, :, ::1] cpt,
           const int[::1] child_start, const int[::1] child_list,
           const unsigned char[:, ::1] bits):
    cdef Py_ssize_t n_docs = bits.shape[0]
    cdef Py_ssize_t n_nodes = parent.shape[0]
    out_arr = np.empty(n_docs, dtype=np.float64)
    lam_arr = np.empty((n_nodes, 2), dtype=np.float64)
    msg_arr = np.empty((n_nodes, 2), dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[:, ::1] lam = lam_arr
    cdef double[:, ::1] msg = msg_arr
    cdef Py_ssize_t d
    with nogil:
        for d in range(n_docs):
            out[d] = _upward(parent, is_latent, obs_col, cpt, bits, d, lam, msg)
    return out_arr


cdef void _root_posterior(const unsigned char[::1] is_latent, const int[::1] obs_col,
                          const double[:, :, ::1] cpt, const unsigned char[:, ::1] bits,
                          Py_ssize_t d, double[:, ::1] lam, double* post) noexcept nogil:
    cdef double a, z
    cdef int b
    if is_latent[0]:
        post[0] = cpt[0, 0, 0] * lam[0, 0]
        post[1] = cpt[0, 0, 1] * lam[0, 1]
    else:
        b = bits[d, obs_col[0]]
        post[b] = 1.0
        post[1 - b] = 0.0
        return
    z = post[0] + post[1]
    post[0] /= z
    post[1] /= z


cdef void _downward(const int[::1] parent, const unsigned char[::1] is_latent,
                    const int[::1] obs_col, const double[:, :, ::1] cpt,
                    const unsigned char[:, ::1] bits, Py_ssize_t d,
                    const double[:, ::1] lam, const double[:, ::1] msg,
                    double[:, ::1] pi, double[:, :, ::1] pair) noexcept nogil:
    """Fill pair[v] = P(v, parent(v) | doc) for v >= 1 and pi for latents."""
    cdef Py_ssize_t n_nodes = parent.shape[0]
    cdef Py_ssize_t v
    cdef int p, b, j, k
    cdef double t0, t1, z, own0, own1, q0, q1
    pi[0, 0] = cpt[0, 0, 0]
    pi[0, 1] = cpt[0, 0, 1]
    for v in range(1, n_nodes):
        p = parent[v]
        t0 = pi[p, 0] * lam[p, 0] / msg[v, 0]
        t1 = pi[p, 1] * lam[p, 1] / msg[v, 1]
        if not is_latent[p]:
            b = bits[d, obs_col[p]]
            if b == 0:
                t1 = 0.0
            else:
                t0 = 0.0
        if is_latent[v]:
            pair[v, 0, 0] = cpt[v, 0, 0] * t0 * lam[v, 0]
            pair[v, 0, 1] = cpt[v, 0, 1] * t0 * lam[v, 1]
            pair[v, 1, 0] = cpt[v, 1, 0] * t1 * lam[v, 0]
            pair[v, 1, 1] = cpt[v, 1, 1] * t1 * lam[v, 1]
        else:
            b = bits[d, obs_col[v]]
            pair[v, 0, b] = cpt[v, 0, b] * t0
            pair[v, 0, 1 - b] = 0.0
            pair[v, 1, b] = cpt[v, 1, b] * t1
            pair[v, 1, 1 - b] = 0.0
        z = pair[v, 0, 0] + pair[v, 0, 1] + pair[v, 1, 0] + pair[v, 1, 1]
        pair[v, 0, 0] /= z
        pair[v, 0, 1] /= z
        pair[v, 1, 0] /= z
        pair[v, 1, 1] /= z
        if is_latent[v]:
            q0 = cpt[v, 0, 0] * t0 + cpt[v, 1, 0] * t1
            q1 = cpt[v, 0, 1] * t0 + cpt[v, 1, 1] * t1
            z = q0 + q1
            pi[v, 0] = q0 / z
            pi[v, 1] = q1 / z


def estep(const int[::1] parent, const unsigned char[::1] is_latent,
          const int[::1] obs_col, const double[:, :, ::1] cpt,
          const int[::1] child_start, const int[::1] child_list,
          const unsigned char[:, ::1] bits, const double[::1] weights):
    cdef Py_ssize_t n_docs = bits.shape[0]
    cdef Py_ssize_t n_nodes = parent.shape[0]
    suff_arr = np.zeros((n_nodes, 2, 2), dtype=np.float64)
    lam_arr = np.empty((n_nodes, 2), dtype=np.float64)
    msg_arr = np.empty((n_nodes, 2), dtype=np.float64)
    pi_arr = np.empty((n_nodes, 2), dtype=np.float64)
    pair_arr = np.empty((n_nodes, 2, 2), dtype=np.float64)
    cdef double[:, :, ::1] suff = suff_arr
    cdef double[:, ::1] lam = lam_arr
    cdef double[:, ::1] msg = msg_arr
    cdef double[:, ::1] pi = pi_arr
    cdef double[:, :, ::1] pair = pair_arr
    cdef double total_ll = 0.0
    cdef double w
    cdef double root_post[2]
    cdef Py_ssize_t d, v
    with nogil:
        for d in range(n_docs):
            w = weights[d]
            total_ll += w * _upward(parent, is_latent, obs_col, cpt, bits, d, lam, msg)
            _root_posterior(is_latent, obs_col, cpt, bits, d, lam, root_post)
            _downward(parent, is_latent, obs_col, cpt, bits, d, lam, msg, pi, pair)
            suff[0, 0, 0] += w * root_post[0]
            suff[0, 0, 1] += w * root_post[1]
            for v in range(1, n_nodes):
                suff[v, 0, 0] += w * pair[v, 0, 0]
                suff[v, 0, 1] += w * pair[v, 0, 1]
                suff[v, 1, 0] += w * pair[v, 1, 0]
                suff[v, 1, 1] += w * pair[v, 1, 1]
    return total_ll, suff_arr


def posteriors(const int[::1] parent, const unsigned char[::1] is_latent,
               const int[::1] obs_col, const double[:, :, ::1] cpt,
               const int[::1] child_start, const int[::1] child_list,
               const unsigned char[:, ::1] bits, const int[::1] node_idx):
    cdef Py_ssize_t n_docs = bits.shape[0]
    cdef Py_ssize_t n_nodes = parent.shape[0]
    cdef Py_ssize_t n_out = node_idx.shape[0]
    out_arr = np.empty((n_docs, n_out, 2), dtype=np.float64)
    lam_arr = np.empty((n_nodes, 2), dtype=np.float64)
    msg_arr = np.empty((n_nodes, 2), dtype=np.float64)
    pi_arr = np.empty((n_nodes, 2), dtype=np.float64)
    pair_arr = np.empty((n_nodes, 2, 2), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] lam = lam_arr
    cdef double[:, ::1] msg = msg_arr
    cdef double[:, ::1] pi = pi_arr
    cdef double[:, :, ::1] pair = pair_arr
    cdef double root_post[2]
    cdef Py_ssize_t d, i
    cdef int v
    with nogil:
        for d in range(n_docs):
            _upward(parent, is_latent, obs_col, cpt, bits, d, lam, msg)
            _root_posterior(is_latent, obs_col, cpt, bits, d, lam, root_post)
            _downward(parent, is_latent, obs_col, cpt, bits, d, lam, msg, pi, pair)
            for i in range(n_out):
                v = node_idx[i]
                if v == 0:
                    out[d, i, 0] = root_post[0]
                    out[d, i, 1] = root_post[1]
                else:
                    out[d, i, 0] = pair[v, 0, 0] + pair[v, 1, 0]
                    out[d, i, 1] = pair[v, 0, 1] + pair[v, 1, 1]
    return out_arr
