"""Array form of a rooted tree model, shared by all inference backends."""

from __future__ import annotations

import numpy as np

from ..model import LATENT, LatentTreeModel


class CompiledTree:
    """Flat arrays for message passing.

    Nodes are re-indexed in topological order with the root at 0, so
    `parent[i] < i` for every non-root node.  The root's prior is stored in
    both rows of its (2, 2) slot to keep the table array uniform.
    """

    __slots__ = (
        "names",
        "index",
        "parent",
        "is_latent",
        "obs_col",
        "obs_names",
        "cpt",
        "child_start",
        "child_list",
    )

    def __init__(self, model: LatentTreeModel, obs_names=None):
        self.names = model.topo_order()
        self.index = {name: i for i, name in enumerate(self.names)}
        n = len(self.names)
        self.obs_names = list(obs_names) if obs_names is not None else model.observed_names
        col = {name: j for j, name in enumerate(self.obs_names)}
        self.parent = np.full(n, -1, dtype=np.int32)
        self.is_latent = np.zeros(n, dtype=np.uint8)
        self.obs_col = np.full(n, -1, dtype=np.int32)
        self.cpt = np.empty((n, 2, 2), dtype=np.float64)
        for i, name in enumerate(self.names):
            var = model.variables[name]
            pa = model.parent[name]
            if pa is not None:
                self.parent[i] = self.index[pa]
            if var.kind == LATENT:
                self.is_latent[i] = 1
            else:
                if name not in col:
                    raise ValueError(f"observed variable {name!r} missing from evidence order")
                self.obs_col[i] = col[name]
            table = model.cpts[name]
            self.cpt[i] = table if table.ndim == 2 else np.stack([table, table])
        counts = np.zeros(n + 1, dtype=np.int64)
        for i in range(1, n):
            counts[self.parent[i] + 1] += 1
        self.child_start = np.cumsum(counts).astype(np.int32)
        fill = self.child_start[:-1].copy()
        self.child_list = np.empty(max(n - 1, 0), dtype=np.int32)
        for i in range(1, n):
            p = self.parent[i]
            self.child_list[fill[p]] = i
            fill[p] += 1

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    def children_of(self, i: int) -> np.ndarray:
        return self.child_list[self.child_start[i] : self.child_start[i + 1]]

    def node_tables(self) -> dict[str, np.ndarray]:
        """Back-convert the table array to per-variable cpts."""
        out = {}
        for i, name in enumerate(self.names):
            out[name] = self.cpt[i, 0].copy() if i == 0 else self.cpt[i].copy()
        return out

    def write_back(self, model: LatentTreeModel) -> LatentTreeModel:
        return model.with_cpts(self.node_tables())

    def set_tables(self, cpts: dict[str, np.ndarray]):
        for name, table in cpts.items():
            i = self.index[name]
            self.cpt[i] = table if table.ndim == 2 else np.stack([table, table])


def compile_tree(model: LatentTreeModel, obs_names=None) -> CompiledTree:
    return CompiledTree(model, obs_names=obs_names)
