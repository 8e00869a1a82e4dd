"""Estimator facade over the trainers and baselines.

Every model follows the familiar fit/predict surface: ``fit`` takes a
training :class:`~exprank.data.InteractionStore`, ``predict`` scores an
array of (user, item, explanation) index triples, and the ranking
helpers expose full score vectors for evaluation.  Constructor
arguments are plain values so ``get_params``/``set_params``/``clone``
from scikit-learn work unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import baselines, training
from .data import InteractionStore
from .evaluate import RankedList, rank_candidates
from .params import EmbeddingTable, Hyperparams


class NotFittedError(RuntimeError):
    pass


def _as_triples(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("expected an (n, 3) array of (user, item, explanation)")
    return X[:, 0].astype(np.int64), X[:, 1].astype(np.int64), X[:, 2].astype(np.int64)


class BaseRanker(BaseEstimator):
    """Shared ranking surface; subclasses implement the score vectors."""

    def _check_fitted(self):
        if getattr(self, "store_", None) is None:
            raise NotFittedError(f"{type(self).__name__} is not fitted")

    def explanation_scores(self, u: int, i: int) -> np.ndarray:
        raise NotImplementedError

    def item_scores(self, u: int) -> np.ndarray:
        raise NotImplementedError

    def rank_explanations(self, u: int, i: int, n: int = 10) -> RankedList:
        self._check_fitted()
        return rank_candidates(self.explanation_scores(u, i), n)

    def predict(self, X) -> np.ndarray:
        """Scores for an (n, 3) array of index triples."""
        self._check_fitted()
        users, items, expls = _as_triples(X)
        return np.array([
            float(self.explanation_scores(int(u), int(i))[int(e)])
            for u, i, e in zip(users, items, expls)
        ])


class _FactorRanker(BaseRanker):
    """Common constructor/fit plumbing for the SGD-trained models."""

    _trainer = None

    def __init__(self, n_factors=20, learning_rate=0.01, reg=0.01,
                 n_epochs=500, mu=0.5, alpha=0.5, init_scale=0.1, seed=0,
                 log_every=0):
        self.n_factors = n_factors
        self.learning_rate = learning_rate
        self.reg = reg
        self.n_epochs = n_epochs
        self.mu = mu
        self.alpha = alpha
        self.init_scale = init_scale
        self.seed = seed
        self.log_every = log_every

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            d=self.n_factors, gamma=self.learning_rate, reg=self.reg,
            epochs=self.n_epochs, mu=self.mu, alpha=self.alpha, seed=self.seed,
        )

    def fit(self, store: InteractionStore):
        report = type(self)._trainer(
            store, self.hyperparams(), init_scale=self.init_scale,
            log_every=self.log_every,
        )
        self.store_ = store
        self.report_ = report
        self.params_ = report.final_params
        return self

    def item_scores(self, u):
        self._check_fitted()
        fp = self.params_
        return fp.P[u] @ fp.Q.T + fp.b_item


class BperRanker(_FactorRanker):
    """Two coupled factorizations blended by ``mu`` at inference."""

    _trainer = staticmethod(training.train_bper)

    def explanation_scores(self, u, i):
        self._check_fitted()
        fp, mu = self.params_, self.mu
        user_side = fp.P[u] @ fp.OU.T + fp.bU
        item_side = fp.Q[i] @ fp.OI.T + fp.bI
        return mu * user_side + (1.0 - mu) * item_side


class BperJointRanker(BperRanker):
    """BperRanker trained jointly with the item-ranking task."""

    _trainer = staticmethod(training.train_bper_j)


class BperPlusRanker(BperRanker):
    """BperRanker with explanation factors gated by projected semantic
    vectors of the explanation texts."""

    def fit(self, store: InteractionStore, embeddings: EmbeddingTable = None):
        if embeddings is None:
            raise ValueError("BperPlusRanker.fit requires an EmbeddingTable")
        report = training.train_bper_plus(
            store, self.hyperparams(), embeddings,
            init_scale=self.init_scale, log_every=self.log_every,
        )
        self.store_ = store
        self.report_ = report
        self.params_ = report.final_params
        self.embeddings_ = embeddings
        gate = embeddings.projected_all()
        self.gated_ou_ = self.params_.OU * gate
        self.gated_oi_ = self.params_.OI * gate
        return self

    def explanation_scores(self, u, i):
        self._check_fitted()
        fp, mu = self.params_, self.mu
        user_side = fp.P[u] @ self.gated_ou_.T + fp.bU
        item_side = fp.Q[i] @ self.gated_oi_.T + fp.bI
        return mu * user_side + (1.0 - mu) * item_side


class PitfRanker(_FactorRanker):
    """Bias-free sum of user-explanation and item-explanation products."""

    _trainer = staticmethod(training.train_pitf)

    def explanation_scores(self, u, i):
        self._check_fitted()
        fp = self.params_
        return fp.P[u] @ fp.OU.T + fp.Q[i] @ fp.OI.T

    def item_scores(self, u):
        self._check_fitted()
        fp = self.params_
        return fp.P[u] @ fp.Q.T


class PitfJointRanker(PitfRanker):
    _trainer = staticmethod(training.train_pitf_j)


class CdRanker(_FactorRanker):
    """Single triple-product score."""

    _trainer = staticmethod(training.train_cd)

    def explanation_scores(self, u, i):
        self._check_fitted()
        cd = self.params_
        return (cd.P[u] * cd.Q[i]) @ cd.O.T

    def item_scores(self, u):
        self._check_fitted()
        cd = self.params_
        return cd.P[u] @ cd.Q.T


class CdJointRanker(CdRanker):
    _trainer = staticmethod(training.train_cd_j)


class RandomRanker(BaseRanker):
    """Seeded uniform scores, freshly drawn on every call."""

    def __init__(self, seed=0):
        self.seed = seed

    def fit(self, store: InteractionStore):
        self.store_ = store
        self.rng_ = np.random.default_rng(self.seed)
        return self

    def explanation_scores(self, u, i):
        self._check_fitted()
        return self.rng_.random(self.store_.n_explanations)

    def item_scores(self, u):
        self._check_fitted()
        return self.rng_.random(self.store_.n_items)


class UserNeighborRanker(BaseRanker):
    """Jaccard user-neighborhood scoring."""

    def __init__(self, n_neighbors=50):
        self.n_neighbors = n_neighbors

    def fit(self, store: InteractionStore):
        self.store_ = store
        self.index_ = baselines.build_neighbors(store, self.n_neighbors)
        return self

    def explanation_scores(self, u, i):
        self._check_fitted()
        return baselines.rucf_score_vector(self.index_, self.store_, u, i)


class ItemNeighborRanker(UserNeighborRanker):
    """Jaccard item-neighborhood scoring."""

    def explanation_scores(self, u, i):
        self._check_fitted()
        return baselines.ricf_score_vector(self.index_, self.store_, u, i)


MODEL_NAMES = (
    "rand", "rucf", "ricf", "cd", "pitf", "bper", "bper+",
    "cd-j", "pitf-j", "bper-j",
)

_FACTOR_CLASSES = {
    "cd": CdRanker, "pitf": PitfRanker, "bper": BperRanker,
    "bper+": BperPlusRanker, "cd-j": CdJointRanker,
    "pitf-j": PitfJointRanker, "bper-j": BperJointRanker,
}

JOINT_MODELS = ("cd-j", "pitf-j", "bper-j")


def make_model(
    name: str, hp: Hyperparams, *, n_neighbors: int = 50,
    init_scale: float = 0.1, log_every: int = 0,
) -> BaseRanker:
    """Instantiate a model by its registry name."""
    if name == "rand":
        return RandomRanker(seed=hp.seed)
    if name == "rucf":
        return UserNeighborRanker(n_neighbors=n_neighbors)
    if name == "ricf":
        return ItemNeighborRanker(n_neighbors=n_neighbors)
    cls = _FACTOR_CLASSES.get(name)
    if cls is None:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    return cls(
        n_factors=hp.d, learning_rate=hp.gamma, reg=hp.reg, n_epochs=hp.epochs,
        mu=hp.mu, alpha=hp.alpha, init_scale=init_scale, seed=hp.seed,
        log_every=log_every,
    )
