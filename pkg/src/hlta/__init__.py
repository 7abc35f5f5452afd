"""Hierarchical latent tree analysis: learn tree-structured models of word
co-occurrence from binary bag-of-words data and read topic hierarchies off
the latent variables."""

__version__ = "0.1.0"

from .corpus import (
    BinaryData,
    Document,
    ProjectedData,
    SparseBinaryCorpus,
    TokenCorpus,
    Vocabulary,
    average_tfidf,
    binarize,
    build_corpus,
    project,
    promote_ngrams,
    select_vocabulary,
    split,
    tokenize,
)
from .em import EmConfig, EmResult, StepwiseState, batch_em, learn_lcm, local_em, stepwise_em
from .evaluation import coherence, compactness, evaluate_run, heldout_per_doc_ll
from .inference import (
    bic,
    brute_force_posteriors,
    doc_log_likelihood,
    pairwise_posterior,
    posterior_marginal,
)
from .model import (
    LatentTreeModel,
    Variable,
    free_param_count,
    joint_log_prob,
    reroot,
    stack_models,
    validate_hltm,
    validate_regular,
)
from .structure import (
    HltaConfig,
    Island,
    MiMatrix,
    bridge_islands,
    build_islands,
    hard_assignment,
    hlta,
    latent_pair_mi,
    mi_to_set,
    one_island,
    pairwise_mi,
    pem_lcm,
    pem_ltm_2l,
    ud_test,
)
from .topics import Topic, TopicHierarchy, extract_hierarchy, extract_topic, narrow_topic
