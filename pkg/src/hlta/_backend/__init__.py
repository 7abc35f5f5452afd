"""Inference backend selection.

The hot kernels (per-document message passing for log-likelihoods, E-steps
and posterior queries) exist twice: a compiled Cython extension and a pure
numpy fallback.  The extension is used when it imported successfully and
the model's tables are strictly positive; set HLTA_BACKEND=numpy to force
the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_ops
from .compiled import CompiledTree, compile_tree

try:
    from . import _core

    HAVE_EXT = True
except ImportError:  # extension not built; numpy fallback only
    _core = None
    HAVE_EXT = False


def active_backend() -> str:
    if os.environ.get("HLTA_BACKEND", "").lower() == "numpy":
        return "numpy"
    return "cython" if HAVE_EXT else "numpy"


def _use_ext(ct) -> bool:
    return active_backend() == "cython" and ct.cpt.min() > 0.0


def _bits_array(bits):
    return np.ascontiguousarray(bits, dtype=np.uint8)


def loglik(ct: CompiledTree, bits) -> np.ndarray:
    bits = _bits_array(bits)
    if _use_ext(ct):
        return _core.loglik(ct.parent, ct.is_latent, ct.obs_col, ct.cpt,
                            ct.child_start, ct.child_list, bits)
    return numpy_ops.loglik(ct, bits)


def estep(ct: CompiledTree, bits, weights=None):
    bits = _bits_array(bits)
    if weights is None:
        weights = np.ones(bits.shape[0])
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if _use_ext(ct):
        return _core.estep(ct.parent, ct.is_latent, ct.obs_col, ct.cpt,
                           ct.child_start, ct.child_list, bits, weights)
    return numpy_ops.estep(ct, bits, weights)


def posteriors(ct: CompiledTree, bits, node_idx) -> np.ndarray:
    bits = _bits_array(bits)
    idx = np.ascontiguousarray(node_idx, dtype=np.int32)
    if _use_ext(ct):
        return _core.posteriors(ct.parent, ct.is_latent, ct.obs_col, ct.cpt,
                                ct.child_start, ct.child_list, bits, idx)
    return numpy_ops.posteriors(ct, bits, idx)


def pairwise_tables(ct: CompiledTree, bits):
    # Per-document pairwise tables are only needed at small scale; the
    # numpy implementation is always used.
    return numpy_ops.pairwise_tables(ct, _bits_array(bits))
