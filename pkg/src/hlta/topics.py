"""Topic extraction from fitted models: per-latent document partitions with
MI-ordered characterizing words, background designation, the topic
hierarchy, and narrowly defined topic sizes."""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, replace

import numpy as np

from .corpus import project
from .em import EmConfig, batch_em
from .model import LATENT, OBSERVED, LatentTreeModel, make_lcm, marginals
from .structure import mutual_information


@dataclass(frozen=True)
class TopicWord:
    word: str
    p1: float  # P(word = 1 | topic state)
    p0: float  # P(word = 1 | background state)
    mi: float  # MI(word; latent)


@dataclass(frozen=True)
class Topic:
    latent: str
    level: int
    size: float  # P(latent = topic state)
    background_size: float
    words: tuple[TopicWord, ...]  # MI-descending


@dataclass
class TopicNode:
    topic: Topic
    children: list["TopicNode"]


@dataclass
class TopicHierarchy:
    roots: list[TopicNode]
    skip_level_1: bool = False

    def all_topics(self):
        stack = list(self.roots)
        while stack:
            node = stack.pop(0)
            yield node.topic
            stack.extend(node.children)

    def find(self, latent: str) -> Topic | None:
        for t in self.all_topics():
            if t.latent == latent:
                return t
        return None


def _subtree_conditionals(model: LatentTreeModel, z: str):
    """P(word | z) for every observed variable in z's downward subtree,
    as 2x2 tables with rows indexed by the state of z."""
    levels = model.levels
    conds: dict[str, np.ndarray] = {}
    stack = [(z, np.eye(2))]
    while stack:
        node, mat = stack.pop()
        for child in model.children[node]:
            if levels[child] >= levels[node]:
                continue  # lateral top-level edge: not part of this subtree
            cmat = mat @ model.cpts[child]
            if model.variables[child].kind == OBSERVED:
                conds[child] = cmat
            else:
                stack.append((child, cmat))
    return conds


def extract_topic(model: LatentTreeModel, z: str, top_k: int | None = 7) -> Topic:
    """Characterize the document partition given by latent z.

    Words in z's subtree are ordered by their MI with z (via the pairwise
    joints obtained by propagation); among the two states, the one where
    the top-3 words occur with the lower total probability is labeled the
    background (s0), the other is the topic (s1).
    """
    if model.variables[z].kind != LATENT:
        raise ValueError(f"{z!r} is not a latent variable")
    pz = marginals(model)[z]
    conds = _subtree_conditionals(model, z)
    if not conds:
        raise ValueError(f"latent {z!r} has no observed variables in its subtree")
    var_order = {name: i for i, name in enumerate(model.variables)}
    scored = []
    for word, cond in conds.items():
        joint = pz[:, None] * cond
        scored.append((word, cond, mutual_information(joint)))
    scored.sort(key=lambda t: (-t[2], var_order[t[0]]))
    top3 = scored[: min(3, len(scored))]
    occurrence = np.array([sum(cond[s, 1] for _, cond, _ in top3) for s in (0, 1)])
    s1 = 1 if occurrence[1] >= occurrence[0] else 0
    s0 = 1 - s1
    words = tuple(
        TopicWord(word, float(cond[s1, 1]), float(cond[s0, 1]), float(mi))
        for word, cond, mi in (scored if top_k is None else scored[:top_k])
    )
    return Topic(
        latent=z,
        level=model.variables[z].level,
        size=float(pz[s1]),
        background_size=float(pz[s0]),
        words=words,
    )


def extract_hierarchy(model: LatentTreeModel, top_k: int | None = 7,
                      skip_level_1: bool = False) -> TopicHierarchy:
    """One topic per latent variable, arranged by the latent skeleton.

    With `skip_level_1`, level-1 latents are omitted (unless they are the
    top level, as in a flat model).
    """
    top = model.top_level
    skip = skip_level_1 and top > 1
    nodes: dict[str, TopicNode] = {}
    for name, var in model.variables.items():
        if var.kind != LATENT:
            continue
        if skip and var.level == 1:
            continue
        nodes[name] = TopicNode(extract_topic(model, name, top_k), [])
    roots: list[TopicNode] = []
    levels = model.levels
    for name, node in nodes.items():
        pa = model.parent[name]
        if pa is not None and pa in nodes and levels[pa] == levels[name] + 1:
            nodes[pa].children.append(node)
        else:
            roots.append(node)
    return TopicHierarchy(roots, skip_level_1=skip_level_1)


def narrow_topic(model: LatentTreeModel, z: str, data, top_k: int = 7,
                 marginal_updates: int = 10) -> Topic:
    """Size of the narrowly defined topic: documents containing the topic's
    word pattern.

    An LCM over z's characterizing words is taken from the fitted model,
    its conditionals frozen, and only the latent's marginal re-estimated on
    the data for `marginal_updates` EM steps.
    """
    broad = extract_topic(model, z, top_k)
    if marginal_updates == 0:
        return broad
    words = [tw.word for tw in broad.words]
    conditionals = {
        tw.word: np.array([[1.0 - tw.p0, tw.p0], [1.0 - tw.p1, tw.p1]])
        for tw in broad.words
    }
    lcm = make_lcm(z, words, prior=np.array([broad.background_size, broad.size]),
                   conditionals=conditionals, level=model.variables[z].level)
    config = EmConfig(max_iters=marginal_updates, ll_tolerance=0.0, restarts=0,
                      frozen=frozenset(words))
    refit = batch_em(lcm, project(data, words), config)
    prior = refit.model.cpts[z]
    return replace(broad, size=float(prior[1]), background_size=float(prior[0]))


# -- export ------------------------------------------------------------------


def _node_dict(node: TopicNode) -> dict:
    t = node.topic
    return {
        "latent": t.latent,
        "level": t.level,
        "size": t.size,
        "words": [
            {"word": w.word, "p1": w.p1, "p0": w.p0, "mi": w.mi} for w in t.words
        ],
        "children": [_node_dict(c) for c in node.children],
    }


def hierarchy_to_json(hierarchy: TopicHierarchy) -> str:
    return json.dumps([_node_dict(r) for r in hierarchy.roots], indent=1)


def _node_from_dict(doc: dict) -> TopicNode:
    topic = Topic(
        latent=doc["latent"],
        level=doc["level"],
        size=doc["size"],
        background_size=1.0 - doc["size"],
        words=tuple(
            TopicWord(w["word"], w["p1"], w["p0"], w["mi"]) for w in doc["words"]
        ),
    )
    return TopicNode(topic, [_node_from_dict(c) for c in doc.get("children", [])])


def hierarchy_from_json(text: str) -> TopicHierarchy:
    docs = json.loads(text)
    return TopicHierarchy([_node_from_dict(d) for d in docs])


def render_text(hierarchy: TopicHierarchy, top_k: int = 7) -> str:
    lines: list[str] = []

    def walk(node: TopicNode, depth: int):
        t = node.topic
        words = " ".join(w.word for w in t.words[:top_k])
        lines.append("  " * depth + f"[{t.size:.2f}] {words}")
        for child in node.children:
            walk(child, depth + 1)

    for root in hierarchy.roots:
        walk(root, 0)
        lines.append("")
    return "\n".join(lines)


def render_html(hierarchy: TopicHierarchy, top_k: int = 7,
                title: str = "Topic hierarchy") -> str:
    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset='utf-8'>",
        f"<title>{html.escape(title)}</title>",
        "<style>body{font-family:monospace} details{margin-left:1.2em}"
        " summary{cursor:pointer}</style>",
        "</head><body>",
        f"<h1>{html.escape(title)}</h1>",
    ]

    def walk(node: TopicNode):
        t = node.topic
        words = " ".join(w.word for w in t.words[:top_k])
        label = html.escape(f"[{t.size:.2f}] {words}")
        if node.children:
            parts.append(f"<details open><summary>{label}</summary>")
            for child in node.children:
                walk(child)
            parts.append("</details>")
        else:
            parts.append(f"<details><summary>{label}</summary></details>")

    for root in hierarchy.roots:
        walk(root)
    parts.append("</body></html>")
    return "\n".join(parts)
