"""HLTA structure learning: empirical mutual information, island building
with the UD-test, island bridging over a maximum spanning tree, hard
assignment, and the top-level loop that grows the hierarchy."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import inference
from .corpus import BinaryData, as_binary_data, project
from .em import EmConfig, batch_em, learn_lcm, local_em, stepwise_em
from .model import (
    LATENT,
    OBSERVED,
    LatentTreeModel,
    Variable,
    stack_models,
)

log = logging.getLogger("hlta")


# -- mutual information ------------------------------------------------------


def mutual_information(joint: np.ndarray) -> float:
    """MI of a joint table in nats; 0*log(0) terms contribute 0."""
    joint = np.asarray(joint, dtype=float)
    total = joint.sum()
    if total <= 0:
        return 0.0
    p = joint / total
    pr = p.sum(axis=1, keepdims=True)
    pc = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p / (pr * pc)), 0.0)
    return float(terms.sum())


@dataclass
class MiMatrix:
    """Symmetric pairwise empirical MI; the diagonal holds entropies."""

    variables: tuple[str, ...]
    values: np.ndarray
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.variables)}

    def value(self, a: str, b: str) -> float:
        return float(self.values[self.index[a], self.index[b]])


def pairwise_mi(data) -> MiMatrix:
    """Empirical MI between every pair of binary columns."""
    bd = as_binary_data(data)
    n_docs = bd.n_docs
    x = sparse.csr_matrix(bd.bits.astype(np.float64))
    n11 = np.asarray((x.T @ x).todense())
    c1 = bd.bits.sum(axis=0).astype(float)
    p11 = n11 / n_docs
    p1 = c1 / n_docs
    p10 = p1[:, None] - p11
    p01 = p1[None, :] - p11
    p00 = 1.0 - p1[:, None] - p1[None, :] + p11

    def term(p, a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 1e-15, p * np.log(p / (a * b)), 0.0)

    q1 = p1[:, None]
    q0 = 1.0 - q1
    r1 = p1[None, :]
    r0 = 1.0 - r1
    mi = term(p11, q1, r1) + term(p10, q1, r0) + term(p01, q0, r1) + term(p00, q0, r0)
    return MiMatrix(tuple(bd.variables), mi)


def mi_to_set(x: str, group, mi: MiMatrix) -> float:
    """MI between a variable and a set: the maximum pairwise entry."""
    group = list(group)
    if not group:
        raise ValueError("the set must be nonempty")
    return max(mi.value(x, a) for a in group)


# -- islands -----------------------------------------------------------------


@dataclass
class Island:
    """A fitted latent class model over a cluster of co-occurring variables."""

    model: LatentTreeModel
    latent: str
    members: tuple[str, ...]
    seeds: tuple[str, ...]  # highest-MI pair; anchors for local EM
    third: str | None = None  # variable added at seeding time (footnote rule)


def ud_test(m1: LatentTreeModel, m2: LatentTreeModel, projected_data,
            delta: float = 3.0) -> bool:
    """True when the one-latent model survives: BIC(m2) - BIC(m1) < delta."""
    return inference.bic(m2, projected_data) - inference.bic(m1, projected_data) < delta


def _attach_leaf(model: LatentTreeModel, leaf: str, parent: str,
                 level: int) -> LatentTreeModel:
    variables = dict(model.variables)
    variables[leaf] = Variable(leaf, OBSERVED, level)
    parents = dict(model.parent)
    parents[leaf] = parent
    cpts = dict(model.cpts)
    cpts[leaf] = np.full((2, 2), 0.5)
    return LatentTreeModel(variables, parents, cpts, model.root, check=False)


def _remove_leaf(model: LatentTreeModel, leaf: str) -> LatentTreeModel:
    variables = {n: v for n, v in model.variables.items() if n != leaf}
    parents = {n: p for n, p in model.parent.items() if n != leaf}
    cpts = {n: t for n, t in model.cpts.items() if n != leaf}
    return LatentTreeModel(variables, parents, cpts, model.root, check=False)


def pem_lcm(island: Island, x: str, projected_data, config: EmConfig,
            rng) -> Island:
    """Attach `x` to the island's latent, estimating only P(x | latent) by
    EM in the submodel of x, the two seed variables and the latent."""
    member_level = island.model.variables[island.members[0]].level
    m1 = _attach_leaf(island.model, x, island.latent, member_level)
    sub_vars = {island.latent, x, *island.seeds}
    fitted = local_em(m1, sub_vars, {x}, projected_data, config, rng)
    return replace(island, model=fitted, members=island.members + (x,))


def pem_ltm_2l(island: Island, w: str, x: str, projected_data,
               config: EmConfig, rng) -> LatentTreeModel:
    """Two-latent alternative: a new latent takes over `w` and `x`; only
    P(new | latent), P(w | new) and P(x | new) are estimated."""
    y = island.latent
    z = y + "'"
    member_level = island.model.variables[island.members[0]].level
    variables = dict(island.model.variables)
    variables[z] = Variable(z, LATENT, island.model.variables[y].level)
    variables[x] = Variable(x, OBSERVED, member_level)
    parents = dict(island.model.parent)
    parents[z] = y
    parents[w] = z
    parents[x] = z
    cpts = dict(island.model.cpts)
    half = np.full((2, 2), 0.5)
    cpts[z] = half
    cpts[w] = half
    cpts[x] = half
    m2 = LatentTreeModel(variables, parents, cpts, island.model.root, check=False)
    anchors = list(island.seeds)
    if w in anchors:
        # The seed being re-parented cannot anchor the submodel; use the
        # other seed plus the variable picked third at seeding time.
        anchors = [a for a in anchors if a != w] + [island.third]
    sub_vars = {y, z, w, x, *anchors}
    return local_em(m2, sub_vars, {z, w, x}, projected_data, config, rng)


def _seed_pair(names, mi: MiMatrix) -> tuple[str, str]:
    idx = [mi.index[n] for n in names]
    sub = mi.values[np.ix_(idx, idx)].copy()
    sub[np.tril_indices(len(idx))] = -np.inf
    flat = int(np.argmax(sub))
    i, j = divmod(flat, len(idx))
    return names[i], names[j]


def _best_outside(group, pool, mi: MiMatrix) -> str:
    scores = [mi_to_set(v, group, mi) for v in pool]
    return pool[int(np.argmax(scores))]


def _island_seeds(members, mi: MiMatrix) -> tuple[str, ...]:
    if len(members) < 2:
        return tuple(members)
    return _seed_pair(list(members), mi)


def one_island(data, pool, delta: float, mu: int, *, mi: MiMatrix | None = None,
               config: EmConfig | None = None, rng=None, latent: str = "Y",
               level: int = 1) -> Island:
    """Grow one island from the highest-MI seed pair.

    Variables join while the UD-test keeps passing; on a failure the island
    is closed without the re-parented pair (which returns to the pool), and
    the island size is capped at `mu` members.
    """
    pool = list(pool)
    config = config or EmConfig()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if mi is None:
        mi = pairwise_mi(data)
    member_level = level - 1
    if len(pool) <= 3:
        model = learn_lcm(pool, project(data, pool), config, rng, latent=latent,
                          level=level, member_levels={m: member_level for m in pool},
                          allow_irregular=len(pool) < 3)
        return Island(model, latent, tuple(pool), _island_seeds(pool, mi))
    a, b = _seed_pair(pool, mi)
    rest = [v for v in pool if v not in (a, b)]
    third = _best_outside([a, b], rest, mi)
    group = [a, b, third]
    rest = [v for v in rest if v != third]
    model = learn_lcm(group, project(data, group), config, rng, latent=latent,
                      level=level, member_levels={m: member_level for m in group})
    island = Island(model, latent, tuple(group), (a, b), third)
    while True:
        x = _best_outside(group, rest, mi)
        w = max(group, key=lambda v: (mi.value(v, x), -group.index(v)))
        rest.remove(x)
        pd = project(data, group + [x])
        m1 = pem_lcm(island, x, pd, config, rng)
        if not rest:
            return m1
        m2 = pem_ltm_2l(island, w, x, pd, config, rng)
        if not ud_test(m1.model, m2, pd, delta):
            members = tuple(v for v in island.members if v != w)
            model = _remove_leaf(island.model, w)
            return Island(model, island.latent, members, _island_seeds(members, mi))
        if len(m1.members) >= mu:
            return m1
        island = m1
        group.append(x)


def island_posteriors(island: Island, data) -> np.ndarray:
    """P(latent | doc) for every document; shape (n_docs, 2)."""
    return inference.posterior_marginals(island.model, data, [island.latent])[:, 0, :]


def _aggregated_joint(post_a: np.ndarray, post_b: np.ndarray) -> np.ndarray:
    joint = post_a.T @ post_b
    return joint / joint.sum()


def latent_pair_mi(island_a: Island, island_b: Island, data) -> float:
    """MI of two island latents, from the normalized per-document product
    of their posterior distributions."""
    if island_a.latent == island_b.latent:
        raise ValueError("latent_pair_mi requires two distinct islands")
    post_a = island_posteriors(island_a, data)
    post_b = island_posteriors(island_b, data)
    return mutual_information(_aggregated_joint(post_a, post_b))


def build_islands(data, delta: float, mu: int, config: EmConfig | None = None,
                  rng=None, level: int = 1) -> list[Island]:
    """Partition all variables into islands, consuming the pool one island
    at a time; a trailing pool of fewer than 3 variables is merged into the
    existing islands by posterior-joint MI."""
    bd = as_binary_data(data)
    config = config or EmConfig()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    mi = pairwise_mi(bd)
    pool = list(bd.variables)
    islands: list[Island] = []
    idx = 1
    while pool:
        if len(pool) < 3 and islands:
            _merge_leftovers(pool, islands, bd, config, rng)
            break
        island = one_island(bd, pool, delta, mu, mi=mi, config=config, rng=rng,
                            latent=f"Z{level}{idx}", level=level)
        idx += 1
        islands.append(island)
        taken = set(island.members)
        pool = [v for v in pool if v not in taken]
        log.info("island %s: %d members (%s)", island.latent, len(island.members),
                 " ".join(island.members[:6]) + ("…" if len(island.members) > 6 else ""))
    return islands


def _merge_leftovers(leftovers, islands, bd: BinaryData, config, rng):
    posts = [island_posteriors(isl, bd) for isl in islands]
    for v in leftovers:
        col = bd.columns([v])[:, 0].astype(float)
        onehot = np.stack([1.0 - col, col], axis=1)
        scores = [mutual_information(_aggregated_joint(onehot, p)) for p in posts]
        best = int(np.argmax(scores))
        target = islands[best]
        member_level = target.model.variables[target.members[0]].level
        grown = _attach_leaf(target.model, v, target.latent, member_level)
        pd = project(bd, list(target.seeds) + [v])
        fitted = local_em(grown, {target.latent, v, *target.seeds}, {v}, pd, config, rng)
        islands[best] = replace(target, model=fitted, members=target.members + (v,))
        log.info("leftover %s merged into %s", v, target.latent)


# -- bridging ----------------------------------------------------------------


def max_spanning_tree(weights: np.ndarray) -> list[tuple[int, int]]:
    """Maximum spanning tree of a complete graph given a symmetric weight
    matrix; ties resolve toward lower edge indices (row-major order)."""
    n = weights.shape[0]
    order = sorted(
        ((i, j) for i in range(n) for j in range(i + 1, n)),
        key=lambda e: (-weights[e[0], e[1]], e[0], e[1]),
    )
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    picked = []
    for i, j in order:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            picked.append((i, j))
            if len(picked) == n - 1:
                break
    return picked


def bridge_islands(islands: list[Island], data, config: EmConfig | None = None,
                   rng=None) -> LatentTreeModel:
    """Connect island latents by a maximum spanning tree of pairwise MI.

    Each new latent-latent edge's table is estimated by EM in a submodel of
    the two latents plus two anchor children each, everything else fixed.
    """
    if not islands:
        raise ValueError("need at least one island")
    config = config or EmConfig()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if len(islands) == 1:
        return islands[0].model
    bd = as_binary_data(data)
    posts = [island_posteriors(isl, bd) for isl in islands]
    n = len(islands)
    weights = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w = mutual_information(_aggregated_joint(posts[i], posts[j]))
            weights[i, j] = weights[j, i] = w
    edges = max_spanning_tree(weights)
    neighbors: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    parent_of = {0: None}
    bfs = [0]
    for node in bfs:
        for nb in sorted(neighbors[node]):
            if nb not in parent_of:
                parent_of[nb] = node
                bfs.append(nb)
    variables: dict[str, Variable] = {}
    parents: dict[str, str | None] = {}
    cpts: dict[str, np.ndarray] = {}
    for k, isl in enumerate(islands):
        variables[isl.latent] = isl.model.variables[isl.latent]
        p = parent_of[k]
        parents[isl.latent] = None if p is None else islands[p].latent
        cpts[isl.latent] = (
            isl.model.cpts[isl.latent] if p is None else np.full((2, 2), 0.5)
        )
        for m in isl.members:
            variables[m] = isl.model.variables[m]
            parents[m] = isl.latent
            cpts[m] = isl.model.cpts[m]
    flat = LatentTreeModel(variables, parents, cpts, islands[0].latent, check=False)
    for k in bfs[1:]:
        child = islands[k]
        par = islands[parent_of[k]]
        table = _estimate_bridge_table(par, child, bd, config, rng)
        cpts[child.latent] = table
    flat = flat.with_cpts(cpts)
    log.info("bridged %d islands; root %s", n, islands[0].latent)
    return flat


def _estimate_bridge_table(par: Island, child: Island, bd: BinaryData,
                           config: EmConfig, rng) -> np.ndarray:
    """P(child latent | parent latent) via EM in the 2-latent submodel with
    two anchor children per island and all other parameters fixed."""
    variables = {par.latent: par.model.variables[par.latent]}
    parents: dict[str, str | None] = {par.latent: None}
    cpts = {par.latent: par.model.cpts[par.latent]}
    anchor_p = list(par.seeds)
    anchor_c = list(child.seeds)
    for m in anchor_p:
        variables[m] = par.model.variables[m]
        parents[m] = par.latent
        cpts[m] = par.model.cpts[m]
    variables[child.latent] = child.model.variables[child.latent]
    parents[child.latent] = par.latent
    cpts[child.latent] = np.full((2, 2), 0.5)
    for m in anchor_c:
        variables[m] = child.model.variables[m]
        parents[m] = child.latent
        cpts[m] = child.model.cpts[m]
    sub = LatentTreeModel(variables, parents, cpts, par.latent, check=False)
    pd = project(bd, anchor_p + anchor_c)
    fitted = local_em(sub, set(variables), {child.latent}, pd, config, rng)
    return fitted.cpts[child.latent]


# -- top-level control ---------------------------------------------------------


def hard_assignment(model: LatentTreeModel, data) -> BinaryData:
    """Complete the data over the model's latent variables: each document
    takes each latent's maximum-posterior state; ties go to state 0."""
    bd = as_binary_data(data)
    latents = model.latent_names
    post = inference.posterior_marginals(model, bd, latents)
    bits = (post[:, :, 1] > post[:, :, 0]).astype(np.uint8)
    return BinaryData(tuple(latents), bits, bd.doc_ids)


@dataclass(frozen=True)
class HltaConfig:
    tau: int = 20  # upper bound on top-level latent count
    mu: int = 15  # upper bound on island size
    delta: float = 3.0  # UD-test threshold
    kappa: int = 50  # final batch-EM steps
    subsample: int | None = None  # structure-phase document budget
    em_mode: str = "batch"  # "batch" or "stepwise" for the final phase
    minibatch_size: int = 1000
    stepwise_updates: int = 100
    alpha: float = 0.75
    seed: int = 0
    island_em: EmConfig = field(default_factory=lambda: EmConfig(
        max_iters=64, ll_tolerance=1e-4, restarts=4))

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.mu < 4:
            raise ValueError("mu must be >= 4")
        if self.delta < 0 or self.kappa < 0:
            raise ValueError("delta and kappa must be >= 0")
        if self.em_mode not in ("batch", "stepwise"):
            raise ValueError("em_mode must be 'batch' or 'stepwise'")


def hlta(data, config: HltaConfig | None = None):
    """Learn a hierarchical latent tree model and its topic hierarchy.

    Flat models are learned, stacked and the data hard-assigned level by
    level until the top level has at most `tau` latents; the final model's
    parameters are then re-estimated on the full data (batch EM for `kappa`
    steps, or stepwise EM).  The structure phase optionally runs on a
    random subsample.
    """
    from .topics import extract_hierarchy

    config = config or HltaConfig()
    bd = as_binary_data(data)
    if len(bd.variables) < 3:
        raise ValueError("need at least 3 variables")
    rng = np.random.default_rng(config.seed)
    level_data = bd.subsample(config.subsample, rng) if config.subsample else bd
    if level_data is not bd:
        log.info("structure phase on %d of %d documents", level_data.n_docs, bd.n_docs)
    model = None
    level = 0
    prev_count = len(bd.variables)
    while True:
        level += 1
        islands = build_islands(level_data, config.delta, config.mu,
                                config.island_em, rng, level)
        flat = bridge_islands(islands, level_data, config.island_em, rng)
        model = flat if model is None else stack_models(flat, model)
        top_count = len(flat.latent_names)
        log.info("level %d: %d variables -> %d latents",
                 level, len(level_data.variables), top_count)
        if top_count <= config.tau:
            break
        if top_count >= prev_count:
            log.warning("level %d did not shrink (%d -> %d); stopping",
                        level, prev_count, top_count)
            break
        prev_count = top_count
        level_data = hard_assignment(flat, level_data)
    if config.em_mode == "stepwise":
        mb = min(config.minibatch_size, bd.n_docs)
        log.info("final stepwise EM: %d updates, minibatch %d", config.stepwise_updates, mb)
        model, _ = stepwise_em(model, bd, mb, config.stepwise_updates,
                               config.alpha, rng)
    elif config.kappa > 0:
        log.info("final batch EM: %d steps", config.kappa)
        model = batch_em(model, bd, EmConfig(max_iters=config.kappa,
                                             ll_tolerance=0.0, restarts=0), rng).model
    return model, extract_hierarchy(model)
