"""Parameter estimation: batch EM with restarts, local EM on submodels with
frozen parameters, and stepwise EM over minibatches."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .corpus import ProjectedData, evidence_matrix
from .model import (
    LATENT,
    OBSERVED,
    LatentTreeModel,
    Variable,
    clamp_table,
    make_lcm,
    marginals,
)


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 64
    ll_tolerance: float = 1e-4
    restarts: int = 4  # random-initialization runs; 0 refines current parameters
    frozen: frozenset = frozenset()  # child-variable names whose table stays fixed

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.ll_tolerance < 0:
            raise ValueError("ll_tolerance must be >= 0")


@dataclass
class EmResult:
    model: LatentTreeModel
    final_ll: float
    history: list[float]  # log-likelihood of each parameter iterate, best run


@dataclass
class StepwiseState:
    """Interpolated sufficient-statistic accumulators for stepwise EM."""

    n_ijk: dict[str, np.ndarray]
    update_count: int = 0
    alpha: float = 0.75


def stepsize(u: int, alpha: float) -> float:
    """Stepwise EM learning rate after u-1 previous updates: (u + 2)^-alpha."""
    return (u + 2.0) ** (-alpha)


def _random_table(shape, rng):
    p = rng.random(shape[:-1])
    return np.stack([1.0 - p, p], axis=-1)


def _init_tables(ct, model, frozen, rng):
    for i, name in enumerate(ct.names):
        if name in frozen:
            table = model.cpts[name]
            ct.cpt[i] = table if table.ndim == 2 else np.stack([table, table])
        elif i == 0:
            p = float(rng.random())
            ct.cpt[i] = np.array([[1.0 - p, p], [1.0 - p, p]])
        else:
            ct.cpt[i] = _random_table((2, 2), rng)


def _mstep(ct, suff, frozen_idx):
    for v in range(ct.n_nodes):
        if v in frozen_idx:
            continue
        if v == 0:
            total = suff[0, 0].sum()
            if total > 0:
                prior = clamp_table(suff[0, 0] / total)
                ct.cpt[0] = np.stack([prior, prior])
        else:
            rows = suff[v]
            totals = rows.sum(axis=1, keepdims=True)
            new = np.where(totals > 0, rows / np.where(totals > 0, totals, 1.0), ct.cpt[v])
            ct.cpt[v] = clamp_table(new)


def batch_em(model: LatentTreeModel, data, config: EmConfig | None = None,
             rng=None) -> EmResult:
    """Fit parameters by EM; the best of `config.restarts` random starts is
    returned (restarts=0 refines the model's current parameters).

    The log-likelihood history of the winning run is non-decreasing up to
    floating-point slack.
    """
    config = config or EmConfig()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    bits, weights = evidence_matrix(data, model.observed_names)
    if bits.shape[0] == 0 or weights.sum() <= 0:
        raise ValueError("EM needs a nonempty dataset")
    ct = _backend.compile_tree(model)
    frozen_idx = {ct.index[name] for name in config.frozen}
    runs = max(config.restarts, 1)
    best = None
    for run in range(runs):
        if config.restarts > 0:
            _init_tables(ct, model, config.frozen, rng)
        else:
            ct.set_tables(model.cpts)
        history: list[float] = []
        for _ in range(config.max_iters):
            ll, suff = _backend.estep(ct, bits, weights)
            history.append(ll)
            if len(history) > 1 and ll - history[-2] < config.ll_tolerance:
                break
            _mstep(ct, suff, frozen_idx)
        else:
            ll = float(_backend.loglik(ct, bits) @ weights)
            history.append(ll)
        if best is None or history[-1] > best[0]:
            best = (history[-1], ct.node_tables(), history)
    final_ll, tables, history = best
    return EmResult(model.with_cpts(tables), final_ll, history)


def stepwise_em(model: LatentTreeModel, data, minibatch_size: int, updates: int,
                alpha: float = 0.75, rng=None, eta_override: float | None = None):
    """Minibatch EM with interpolated sufficient statistics.

    The data is randomly divided into equal-sized minibatches (re-divided
    each pass); after each minibatch b the accumulators move by the
    stepsize eta_u toward the batch statistics and the parameters are
    re-normalized from them.  Returns (model', StepwiseState).

    `eta_override` pins the stepsize (used to check the degenerate
    equivalence with one batch-EM iteration).
    """
    if not 0.5 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0.5, 1]")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if isinstance(data, ProjectedData):
        raise TypeError("stepwise EM runs on document-level data, not projections")
    bits, _ = evidence_matrix(data, model.observed_names)
    n_docs = bits.shape[0]
    if minibatch_size > n_docs:
        raise ValueError(f"minibatch size {minibatch_size} exceeds {n_docs} documents")
    ct = _backend.compile_tree(model)
    ct.set_tables(model.cpts)
    acc = np.zeros((ct.n_nodes, 2, 2))
    batches: list[np.ndarray] = []
    u = 0
    while u < updates:
        if not batches:
            order = rng.permutation(n_docs)
            # Partition randomness lives in the grouping; keep each batch in
            # document order so a single full-data batch sums like batch EM.
            batches = [
                np.sort(order[lo : lo + minibatch_size])
                for lo in range(0, n_docs, minibatch_size)
            ]
        batch = batches.pop(0)
        u += 1
        eta = eta_override if eta_override is not None else stepsize(u, alpha)
        _, suff = _backend.estep(ct, bits[batch], np.ones(len(batch)))
        acc *= 1.0 - eta
        acc += eta * suff
        _mstep(ct, acc, frozen_idx=set())
    state = StepwiseState(
        n_ijk={
            name: (acc[i, 0].copy() if i == 0 else acc[i].copy())
            for i, name in enumerate(ct.names)
        },
        update_count=u,
        alpha=alpha,
    )
    return ct.write_back(model), state


def local_em(model: LatentTreeModel, submodel_vars, free_cpts, projected_data,
             config: EmConfig | None = None, rng=None) -> LatentTreeModel:
    """Run EM inside the subtree induced by `submodel_vars`, updating only
    the tables named in `free_cpts`; everything else stays bitwise fixed.

    Evidence comes from `projected_data` (its variables mark which
    submodel nodes are observed), so the E-step cost depends on the number
    of distinct cases, not the corpus size.
    """
    free = set(free_cpts)
    if not free:
        return model
    sub = [v for v in model.variables if v in set(submodel_vars)]
    if len(sub) != len(set(submodel_vars)):
        missing = set(submodel_vars) - set(model.variables)
        raise ValueError(f"submodel variables not in model: {sorted(missing)}")
    if not free <= set(sub):
        raise ValueError("free_cpts must be a subset of the submodel variables")
    sub_set = set(sub)
    roots = [v for v in sub if model.parent[v] not in sub_set]
    if len(roots) != 1:
        raise ValueError("submodel variables must induce a connected subtree")
    sub_root = roots[0]
    evidence_vars = [v for v in sub if v in set(projected_data.variables)]
    if not evidence_vars:
        raise ValueError("projected data covers no submodel variable")
    variables = {}
    parent = {}
    cpts = {}
    for v in sub:
        kind = OBSERVED if v in set(evidence_vars) else LATENT
        variables[v] = Variable(v, kind, model.variables[v].level)
        if v == sub_root:
            parent[v] = None
            cpts[v] = (
                model.cpts[v] if model.parent[v] is None else marginals(model)[v]
            )
        else:
            parent[v] = model.parent[v]
            cpts[v] = model.cpts[v]
    if model.parent[sub_root] is not None and sub_root in free:
        raise ValueError("cannot free the subtree root's table unless it is the model root")
    sub_model = LatentTreeModel(variables, parent, cpts, root=sub_root)
    config = config or EmConfig()
    config = replace(config, frozen=frozenset(set(sub) - free))
    result = batch_em(sub_model, projected_data, config, rng)
    return model.with_cpts({v: result.model.cpts[v] for v in free})


def learn_lcm(members, projected_data, config: EmConfig | None = None, rng=None,
              latent: str = "Y", level: int = 1, member_levels=None,
              allow_irregular: bool = False) -> LatentTreeModel:
    """Fit a latent class model over `members` by batch EM with restarts."""
    members = list(members)
    if len(members) < 3 and not allow_irregular:
        raise ValueError("an LCM over fewer than 3 variables is irregular")
    uniform = np.full((2, 2), 0.5)
    lcm = make_lcm(
        latent,
        members,
        prior=np.array([0.5, 0.5]),
        conditionals={m: uniform for m in members},
        level=level,
        member_levels=member_levels,
    )
    config = config or EmConfig()
    if config.restarts < 1:
        config = replace(config, restarts=4)
    return batch_em(lcm, projected_data, config, rng).model
