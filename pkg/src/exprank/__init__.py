"""Learning-to-rank models for recommendation explanations."""

from .data import InteractionStore, SplitSpec, TripleRecord, load_triples, save_triples, split, subsample_training
from .params import (
    CDParams,
    EmbeddingTable,
    FactorParams,
    Hyperparams,
    embed_bper_into_cd,
    embed_bper_plus_into_cd,
    init_factor_params,
    load_checkpoint,
    save_checkpoint,
    score_bper,
    score_bper_plus,
    score_cd,
    score_item,
    score_item_expl,
    score_pitf,
    score_user_expl,
)
from .training import (
    Sampler,
    TrainReport,
    train_bper,
    train_bper_j,
    train_bper_plus,
    train_cd,
    train_cd_j,
    train_pitf,
    train_pitf_j,
)
from .evaluate import (
    MetricsReport,
    RankedList,
    evaluate_explanation_ranking,
    evaluate_joint,
    metrics_for_pair,
    top_explanations,
    top_items,
)
from .estimators import (
    BperJointRanker,
    BperPlusRanker,
    BperRanker,
    CdJointRanker,
    CdRanker,
    ItemNeighborRanker,
    MODEL_NAMES,
    PitfJointRanker,
    PitfRanker,
    RandomRanker,
    UserNeighborRanker,
    make_model,
)
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
