"""Compare the compiled inference kernel against the numpy fallback.

Builds a synthetic three-level hierarchy, samples documents, and times the
three hot entry points (per-document log-likelihood, one E-step, posterior
queries) under both backends.

    python benchmarks/bench_backends.py [--words 300] [--docs 20000]
"""

import argparse
import time

import numpy as np

from hlta._backend import HAVE_EXT, _core, compile_tree, numpy_ops
from hlta.model import LATENT, OBSERVED, LatentTreeModel, Variable, sample


def synthetic_hierarchy(n_words, rng):
    variables, parent, cpts = {}, {}, {}
    n_l1 = max(n_words // 5, 1)
    n_l2 = max(n_l1 // 4, 1)
    l2 = [f"Z2{i}" for i in range(n_l2)]
    l1 = [f"Z1{i}" for i in range(n_l1)]
    for i, z in enumerate(l2):
        variables[z] = Variable(z, LATENT, 2)
        parent[z] = None if i == 0 else l2[i - 1]
        p = rng.uniform(0.1, 0.4)
        cpts[z] = np.array([1 - p, p]) if i == 0 else _rand_table(rng)
    for i, z in enumerate(l1):
        variables[z] = Variable(z, LATENT, 1)
        parent[z] = l2[i % n_l2]
        cpts[z] = _rand_table(rng)
    for j in range(n_words):
        w = f"w{j}"
        variables[w] = Variable(w, OBSERVED, 0)
        parent[w] = l1[j % n_l1]
        cpts[w] = _rand_table(rng)
    return LatentTreeModel(variables, parent, cpts, l2[0])


def _rand_table(rng):
    lo, hi = rng.uniform(0.02, 0.2), rng.uniform(0.5, 0.9)
    return np.array([[1 - lo, lo], [1 - hi, hi]])


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--words", type=int, default=300)
    ap.add_argument("--docs", type=int, default=20000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    model = synthetic_hierarchy(args.words, rng)
    _, bits = sample(model, args.docs, rng)
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    weights = np.ones(args.docs)
    ct = compile_tree(model)
    latents = np.array(
        [i for i, n in enumerate(ct.names) if model.variables[n].kind == LATENT],
        dtype=np.int32,
    )
    print(f"model: {ct.n_nodes} nodes ({args.words} observed), {args.docs} docs")
    rows = []
    rows.append(("loglik", timeit(lambda: numpy_ops.loglik(ct, bits)),
                 timeit(lambda: _core.loglik(ct.parent, ct.is_latent, ct.obs_col,
                                             ct.cpt, ct.child_start, ct.child_list,
                                             bits)) if HAVE_EXT else None))
    rows.append(("estep", timeit(lambda: numpy_ops.estep(ct, bits, weights)),
                 timeit(lambda: _core.estep(ct.parent, ct.is_latent, ct.obs_col,
                                            ct.cpt, ct.child_start, ct.child_list,
                                            bits, weights)) if HAVE_EXT else None))
    rows.append(("posteriors", timeit(lambda: numpy_ops.posteriors(ct, bits, latents)),
                 timeit(lambda: _core.posteriors(ct.parent, ct.is_latent, ct.obs_col,
                                                 ct.cpt, ct.child_start, ct.child_list,
                                                 bits, latents)) if HAVE_EXT else None))
    print(f"{'kernel':<12}{'numpy':>10}{'cython':>10}{'speedup':>9}")
    for name, t_np, t_cy in rows:
        if t_cy is None:
            print(f"{name:<12}{t_np:>9.3f}s{'-':>10}{'-':>9}")
        else:
            print(f"{name:<12}{t_np:>9.3f}s{t_cy:>9.3f}s{t_np / t_cy:>8.1f}x")
    if not HAVE_EXT:
        print("compiled extension not built; run: python setup.py build_ext --inplace")


if __name__ == "__main__":
    main()
