"""Latent tree models over binary variables.

A model is stored in rooted form: a parent map plus one probability table
per variable (a prior for the root, a 2x2 row-stochastic table for every
other node, indexed [parent_state, child_state]).  The rooted form is a
representation choice only; `reroot` moves to any equivalent rooting
without changing the joint distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

OBSERVED = "observed"
LATENT = "latent"

# CPT entries are clamped into [PROB_FLOOR, 1 - PROB_FLOOR] after every
# M-step so learned models never assign probability zero.
PROB_FLOOR = 1e-6


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # OBSERVED or LATENT
    level: int = 0  # observed variables sit at level 0
    cardinality: int = 2


@dataclass(frozen=True)
class Cpt:
    """One conditional table: P(child = k | parent = j), or the root prior."""

    child: str
    parent: str | None
    table: np.ndarray  # (2,) for the root, (2, 2) otherwise


class ModelError(ValueError):
    pass


class LatentTreeModel:
    """Tree-structured Bayesian network with binary variables.

    Treated as an immutable value: learning steps build new models via
    `with_cpts` or the constructor instead of mutating in place.
    """

    def __init__(self, variables, parent, cpts, root, check=True):
        self.variables: dict[str, Variable] = dict(variables)
        self.parent: dict[str, str | None] = dict(parent)
        self.cpts: dict[str, np.ndarray] = {
            name: np.asarray(t, dtype=float) for name, t in cpts.items()
        }
        self.root: str = root
        self.children: dict[str, list[str]] = {name: [] for name in self.variables}
        for name, pa in self.parent.items():
            if pa is not None:
                if pa not in self.children:
                    raise ModelError(f"{name!r} has unknown parent {pa!r}")
                self.children[pa].append(name)
        if check:
            self._check()

    def _check(self):
        names = set(self.variables)
        if self.root not in names:
            raise ModelError(f"root {self.root!r} is not a variable")
        if set(self.parent) != names or set(self.cpts) != names:
            raise ModelError("parent map and cpts must cover every variable")
        if self.parent[self.root] is not None:
            raise ModelError("root must have no parent")
        # Connectivity: every node reaches the root through the parent map.
        for name in self.variables:
            seen = set()
            node = name
            while node is not None:
                if node in seen:
                    raise ModelError(f"parent cycle through {node!r}")
                seen.add(node)
                node = self.parent[node]
            if self.root not in seen:
                raise ModelError(f"{name!r} is disconnected from the root")
        for name, table in self.cpts.items():
            want = (2,) if name == self.root else (2, 2)
            if table.shape != want:
                raise ModelError(f"cpt for {name!r} has shape {table.shape}, want {want}")
            rows = table[None, :] if table.ndim == 1 else table
            if not np.allclose(rows.sum(axis=1), 1.0, atol=1e-9):
                raise ModelError(f"cpt rows for {name!r} do not sum to 1")
            if (rows < -1e-12).any() or (rows > 1 + 1e-12).any():
                raise ModelError(f"cpt entries for {name!r} outside [0, 1]")

    # -- structure views ---------------------------------------------------

    @property
    def observed_names(self) -> list[str]:
        return [n for n, v in self.variables.items() if v.kind == OBSERVED]

    @property
    def latent_names(self) -> list[str]:
        return [n for n, v in self.variables.items() if v.kind == LATENT]

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(pa, ch) for ch, pa in self.parent.items() if pa is not None]

    @property
    def levels(self) -> dict[str, int]:
        return {n: v.level for n, v in self.variables.items()}

    @property
    def top_level(self) -> int:
        return max(v.level for v in self.variables.values())

    @property
    def top_latents(self) -> list[str]:
        top = self.top_level
        return [n for n, v in self.variables.items() if v.level == top and v.kind == LATENT]

    def neighbors(self, name: str) -> list[str]:
        out = list(self.children[name])
        if self.parent[name] is not None:
            out.append(self.parent[name])
        return out

    def cpt(self, name: str) -> Cpt:
        return Cpt(child=name, parent=self.parent[name], table=self.cpts[name])

    def topo_order(self) -> list[str]:
        order = [self.root]
        stack = list(reversed(self.children[self.root]))
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self.children[node]))
        return order

    def with_cpts(self, new_cpts: dict[str, np.ndarray]) -> "LatentTreeModel":
        merged = dict(self.cpts)
        merged.update(new_cpts)
        return LatentTreeModel(self.variables, self.parent, merged, self.root, check=False)

    def __repr__(self):
        return (
            f"LatentTreeModel({len(self.observed_names)} observed, "
            f"{len(self.latent_names)} latent, root={self.root!r})"
        )


def make_lcm(latent, members, prior, conditionals, level=1, member_levels=None):
    """Build a latent class model: one latent root with `members` as leaves.

    `conditionals` maps member name -> (2, 2) table P(member | latent).
    """
    member_levels = member_levels or {}
    variables = {latent: Variable(latent, LATENT, level)}
    parent: dict[str, str | None] = {latent: None}
    cpts = {latent: np.asarray(prior, dtype=float)}
    for m in members:
        variables[m] = Variable(m, OBSERVED, member_levels.get(m, level - 1))
        parent[m] = latent
        cpts[m] = np.asarray(conditionals[m], dtype=float)
    return LatentTreeModel(variables, parent, cpts, root=latent)


def joint_log_prob(model: LatentTreeModel, assignment) -> float:
    """log P(assignment) for a complete assignment over all variables."""
    missing = set(model.variables) - set(assignment)
    if missing:
        raise ModelError(f"assignment misses variables: {sorted(missing)}")
    total = 0.0
    for name in model.variables:
        pa = model.parent[name]
        table = model.cpts[name]
        p = table[assignment[name]] if pa is None else table[assignment[pa], assignment[name]]
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


def free_param_count(model: LatentTreeModel) -> int:
    """Number of free parameters; invariant under rerooting."""
    count = 0
    for name, var in model.variables.items():
        pa = model.parent[name]
        rows = 1 if pa is None else model.variables[pa].cardinality
        count += rows * (var.cardinality - 1)
    return count


def validate_regular(model: LatentTreeModel) -> list[str]:
    """Return irregularity messages; empty means the model is regular.

    For a latent node Z with neighbors Z_1..Z_k the requirement is
    |Z| <= prod |Z_i| / max |Z_i|, strict when k == 2.  With binary
    variables this reduces to: every latent node has >= 3 neighbors.
    """
    violations = []
    for name, var in model.variables.items():
        if var.kind != LATENT:
            continue
        cards = [model.variables[n].cardinality for n in model.neighbors(name)]
        if not cards:
            violations.append(f"latent {name!r} has no neighbors")
            continue
        bound = np.prod(cards) / max(cards)
        if var.cardinality > bound or (len(cards) == 2 and var.cardinality >= bound):
            violations.append(
                f"latent {name!r} with {len(cards)} neighbors violates the "
                f"cardinality bound ({var.cardinality} vs {bound:g})"
            )
    return violations


def validate_hltm(model: LatentTreeModel) -> list[str]:
    """Check the layered-hierarchy invariants on top of tree structure."""
    problems = []
    top = model.top_level
    for name, var in model.variables.items():
        lv = var.level
        if var.kind == OBSERVED:
            latent_neighbors = [
                n for n in model.neighbors(name) if model.variables[n].kind == LATENT
            ]
            if len(latent_neighbors) != 1:
                problems.append(f"observed {name!r} has {len(latent_neighbors)} latent neighbors")
            continue
        for n in model.neighbors(name):
            nlv = model.variables[n].level
            if abs(nlv - lv) > 1:
                problems.append(f"edge {name!r}-{n!r} skips levels ({lv} vs {nlv})")
            if nlv == lv and lv != top:
                problems.append(f"lateral edge {name!r}-{n!r} below the top level")
    return problems


def marginals(model: LatentTreeModel) -> dict[str, np.ndarray]:
    """Prior marginal P(V) for every variable, by one downward pass."""
    out: dict[str, np.ndarray] = {}
    for name in model.topo_order():
        pa = model.parent[name]
        if pa is None:
            out[name] = model.cpts[name].copy()
        else:
            out[name] = out[pa] @ model.cpts[name]
    return out


def edge_joint(model: LatentTreeModel, parent_name: str, child_name: str) -> np.ndarray:
    """Joint P(parent, child) over a tree edge, rows indexed by the parent."""
    if model.parent[child_name] != parent_name:
        raise ModelError(f"{parent_name!r} -> {child_name!r} is not an edge")
    return marginals(model)[parent_name][:, None] * model.cpts[child_name]


def reroot(model: LatentTreeModel, new_root: str) -> LatentTreeModel:
    """Redirect the rooted representation at `new_root`, preserving the joint.

    Tables along reversed edges are recomputed from the pairwise joints of
    adjacent variables, so the distribution over all variables is unchanged.
    """
    if new_root not in model.variables:
        raise ModelError(f"{new_root!r} not in model")
    if model.variables[new_root].kind != LATENT:
        raise ModelError(f"new root {new_root!r} must be latent")
    if new_root == model.root:
        return model
    margs = marginals(model)
    parent: dict[str, str | None] = {new_root: None}
    cpts: dict[str, np.ndarray] = {new_root: margs[new_root].copy()}
    # BFS over the undirected tree, orienting edges away from the new root.
    queue = [new_root]
    while queue:
        node = queue.pop(0)
        for nb in model.neighbors(node):
            if nb in parent:
                continue
            parent[nb] = node
            if model.parent[nb] == node:
                cpts[nb] = model.cpts[nb].copy()
            else:
                # Edge originally oriented nb -> node; flip via the joint.
                joint = margs[nb][:, None] * model.cpts[node]  # [nb_state, node_state]
                denom = margs[node]
                table = np.where(denom[:, None] > 0, joint.T / denom[:, None], 0.5)
                cpts[nb] = table
            queue.append(nb)
    ordered = {name: model.variables[name] for name in model.variables}
    return LatentTreeModel(ordered, parent, cpts, root=new_root, check=False)


def stack_models(upper: LatentTreeModel, lower: LatentTreeModel) -> LatentTreeModel:
    """Stack a flat model for the top-level latents on top of `lower`.

    The lateral links among `lower`'s top latents are cut; each top latent
    is re-parented under `upper`'s structure and takes its table from
    `upper`.  All other parameters are copied from the two source models.
    """
    tops = set(lower.top_latents)
    if set(upper.observed_names) != tops:
        raise ModelError(
            "upper model's observed variables must be exactly the lower model's top latents"
        )
    variables = dict(lower.variables)
    for name in upper.latent_names:
        if name in variables:
            raise ModelError(f"upper latent {name!r} collides with an existing variable")
        variables[name] = upper.variables[name]
    parent = dict(lower.parent)
    cpts = {n: t.copy() for n, t in lower.cpts.items()}
    for name in upper.latent_names:
        parent[name] = upper.parent[name]
        cpts[name] = upper.cpts[name].copy()
    for name in tops:
        parent[name] = upper.parent[name]
        cpts[name] = upper.cpts[name].copy()
    return LatentTreeModel(variables, parent, cpts, root=upper.root)


def sample(model: LatentTreeModel, n: int, rng, include_latent=False):
    """Draw `n` joint samples by ancestral sampling.

    Returns (names, matrix) with one uint8 column per variable; columns are
    the observed variables in model order unless `include_latent` is set.
    """
    order = model.topo_order()
    values: dict[str, np.ndarray] = {}
    for name in order:
        pa = model.parent[name]
        u = rng.random(n)
        if pa is None:
            values[name] = (u < model.cpts[name][1]).astype(np.uint8)
        else:
            p1 = model.cpts[name][values[pa], 1]
            values[name] = (u < p1).astype(np.uint8)
    names = (
        list(model.variables) if include_latent else model.observed_names
    )
    matrix = np.stack([values[name] for name in names], axis=1)
    return names, matrix


def clamp_table(table: np.ndarray, floor: float = PROB_FLOOR) -> np.ndarray:
    return np.clip(table, floor, 1.0 - floor)


# -- serialization ---------------------------------------------------------


def to_json(model: LatentTreeModel) -> str:
    doc = {
        "variables": [
            {"name": v.name, "kind": v.kind, "level": v.level}
            for v in model.variables.values()
        ],
        "edges": [[pa, ch] for pa, ch in model.edges],
        "root": model.root,
        "cpts": {name: model.cpts[name].ravel().tolist() for name in model.variables},
        "levels": {name: v.level for name, v in model.variables.items()},
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> LatentTreeModel:
    doc = json.loads(text)
    variables = {
        v["name"]: Variable(v["name"], v["kind"], v["level"]) for v in doc["variables"]
    }
    parent: dict[str, str | None] = {name: None for name in variables}
    for pa, ch in doc["edges"]:
        parent[ch] = pa
    cpts = {}
    for name, flat in doc["cpts"].items():
        arr = np.asarray(flat, dtype=float)
        cpts[name] = arr if name == doc["root"] else arr.reshape(2, 2)
    return LatentTreeModel(variables, parent, cpts, root=doc["root"])


def save(model: LatentTreeModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(model))


def load(path) -> LatentTreeModel:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json(fh.read())
