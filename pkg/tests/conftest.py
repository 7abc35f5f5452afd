"""Shared model generators and enumeration helpers."""

import itertools

import numpy as np
import pytest

from hlta.corpus import BinaryData
from hlta.model import (
    LATENT,
    OBSERVED,
    LatentTreeModel,
    Variable,
    joint_log_prob,
    sample,
)

TOY_GROUPS = {
    "T1": {
        "g1": ["orbit", "earth", "solar", "satellite"],
        "g2": ["space", "nasa", "shuttle", "mission"],
        "g3": ["moon", "lunar"],
    },
    "T2": {
        "g4": ["team", "season"],
        "g5": ["players", "baseball", "league"],
        "g6": ["games", "win", "won"],
        "g7": ["hockey", "nhl"],
    },
    "T3": {
        "g8": ["card", "video", "driver"],
        "g9": ["windows", "dos"],
        "g10": ["graphics", "display", "image"],
        "g11": ["computer", "science"],
    },
}


def bern(p):
    return np.array([1.0 - p, p])


def table(p_given_0, p_given_1):
    return np.array([[1.0 - p_given_0, p_given_0], [1.0 - p_given_1, p_given_1]])


def toy_hierarchy_model():
    """Three top-level themes, 11 word-pattern latents, 30 words.

    Separations are strong enough that the hard-assigned level-1 columns
    stay unidimensional within a theme at 20k documents.
    """
    variables, parent, cpts = {}, {}, {}
    tops = list(TOY_GROUPS)
    priors = [0.20, 0.24, 0.28]
    for i, top in enumerate(tops):
        variables[top] = Variable(top, LATENT, 2)
        parent[top] = None if i == 0 else tops[i - 1]
        cpts[top] = bern(priors[i]) if i == 0 else table(0.08, 0.35)
    k = 0
    for top, subs in TOY_GROUPS.items():
        for z, words in subs.items():
            variables[z] = Variable(z, LATENT, 1)
            parent[z] = top
            cpts[z] = table(0.03 + 0.005 * (k % 3), 0.88 - 0.01 * (k % 4))
            k += 1
            for w in words:
                variables[w] = Variable(w, OBSERVED, 0)
                parent[w] = z
                cpts[w] = table(0.02 + 0.005 * (k % 3), 0.75 + 0.01 * (k % 5))
    model = LatentTreeModel(variables, parent, cpts, tops[0])
    word_group = {
        w: top for top, subs in TOY_GROUPS.items() for ws in subs.values() for w in ws
    }
    return model, word_group


def sample_data(model, n, seed) -> BinaryData:
    rng = np.random.default_rng(seed)
    names, bits = sample(model, n, rng)
    return BinaryData(tuple(names), bits)


def random_ltm(rng, n_latent=None, n_obs=None, p_range=(0.02, 0.98)):
    """Random tree: latents form a random attachment tree, observed
    variables hang off random latents."""
    n_latent = n_latent if n_latent is not None else int(rng.integers(1, 5))
    n_obs = n_obs if n_obs is not None else int(rng.integers(2, 13 - n_latent))
    lo, hi = p_range
    variables, parent, cpts = {}, {}, {}
    lat = [f"Z{i}" for i in range(n_latent)]
    for i, z in enumerate(lat):
        variables[z] = Variable(z, LATENT, 1)
        parent[z] = None if i == 0 else lat[int(rng.integers(0, i))]
        if i == 0:
            cpts[z] = bern(rng.uniform(lo, hi))
        else:
            cpts[z] = np.stack([bern(rng.uniform(lo, hi)) for _ in range(2)])
    for j in range(n_obs):
        x = f"x{j}"
        variables[x] = Variable(x, OBSERVED, 0)
        parent[x] = lat[int(rng.integers(0, n_latent))]
        cpts[x] = np.stack([bern(rng.uniform(lo, hi)) for _ in range(2)])
    return LatentTreeModel(variables, parent, cpts, lat[0])


def lcm_generator(words, prior=0.4, p_out=0.05, p_in=0.8, level=1):
    from hlta.model import make_lcm

    conds = {w: table(p_out, p_in) for w in words}
    return make_lcm("G", list(words), bern(prior), conds, level=level)


def two_block_generator(block_a, block_b, coupling=(0.3, 0.6), prior=0.4,
                        p_out=0.05, p_in=0.8):
    variables, parent, cpts = {}, {}, {}
    variables["A"] = Variable("A", LATENT, 1)
    parent["A"] = None
    cpts["A"] = bern(prior)
    variables["B"] = Variable("B", LATENT, 1)
    parent["B"] = "A"
    cpts["B"] = table(*coupling)
    for w in block_a:
        variables[w] = Variable(w, OBSERVED, 0)
        parent[w] = "A"
        cpts[w] = table(p_out, p_in)
    for w in block_b:
        variables[w] = Variable(w, OBSERVED, 0)
        parent[w] = "B"
        cpts[w] = table(p_out, p_in)
    return LatentTreeModel(variables, parent, cpts, "A")


def enumerate_joint(model):
    """Exhaustive joint table over all variables (test oracle)."""
    names = list(model.variables)
    out = {}
    for combo in itertools.product((0, 1), repeat=len(names)):
        out[combo] = np.exp(joint_log_prob(model, dict(zip(names, combo))))
    return names, out


def observed_joint(model):
    """Joint over observed variables with latents summed out (oracle)."""
    names, full = enumerate_joint(model)
    obs_pos = [i for i, n in enumerate(names) if model.variables[n].kind == OBSERVED]
    out = {}
    for combo, p in full.items():
        key = tuple(combo[i] for i in obs_pos)
        out[key] = out.get(key, 0.0) + p
    return [names[i] for i in obs_pos], out


@pytest.fixture(scope="session")
def toy_model():
    return toy_hierarchy_model()
