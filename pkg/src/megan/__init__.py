"""Adversarial multi-view network embedding.

A generator fuses two node embeddings and models their per-view link
probabilities; a discriminator scores node pairs as real or generated.
Training alternates policy-gradient generator updates (negatives chosen
from union neighborhoods) with discriminator ascent, and the learned
embedding feeds node classification, link prediction, and 2-D projection.
"""

__version__ = "0.1.0"

from .errors import MeganError
from .graph import (
    MultiViewGraph,
    NeighborIndex,
    connectivity,
    load_graph,
    neighbor_union,
    sample_positive_pairs,
    save_graph,
)
from .generator import (
    GeneratorParams,
    fuse,
    generator_gradient,
    init_generator_params,
    joint_prob,
    select_negative,
    view_probs,
)
from .discriminator import (
    DiscriminatorParams,
    discriminator_gradient,
    init_discriminator_params,
    score,
)
from .trainer import (
    TrainConfig,
    TrainState,
    export_embedding,
    load_embedding,
    pretrain,
    train,
)
from .evaluate import (
    LinkSplit,
    average_precision,
    link_prediction,
    link_split,
    micro_macro_f1,
    node_classification,
    project_2d,
    ranking_auc,
)
from .synth import SbmSpec, ViewSpec, complementary_preset, generate

__all__ = [
    "MeganError",
    "MultiViewGraph",
    "NeighborIndex",
    "connectivity",
    "load_graph",
    "neighbor_union",
    "sample_positive_pairs",
    "save_graph",
    "GeneratorParams",
    "fuse",
    "generator_gradient",
    "init_generator_params",
    "joint_prob",
    "select_negative",
    "view_probs",
    "DiscriminatorParams",
    "discriminator_gradient",
    "init_discriminator_params",
    "score",
    "TrainConfig",
    "TrainState",
    "export_embedding",
    "load_embedding",
    "pretrain",
    "train",
    "LinkSplit",
    "average_precision",
    "link_prediction",
    "link_split",
    "micro_macro_f1",
    "node_classification",
    "project_2d",
    "ranking_auc",
    "SbmSpec",
    "ViewSpec",
    "complementary_preset",
    "generate",
    "__version__",
]
