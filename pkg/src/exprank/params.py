"""Model parameters and scoring functions.

Two parameter families are used: :class:`FactorParams` (two coupled
matrix factorizations over user-explanation and item-explanation pairs,
plus item biases for the joint item-ranking task) and :class:`CDParams`
(a single triple-product factorization).  The conversion helpers at the
bottom rewrite the former as the latter, which is checked score-for-score
in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InteractionStore


@dataclass(frozen=True)
class Hyperparams:
    """Training knobs shared by every factor model.

    ``mu`` blends user-side and item-side explanation scores at
    inference time only; ``alpha`` weights the explanation task inside
    the joint objective.
    """

    d: int = 20
    gamma: float = 0.01
    reg: float = 0.01
    epochs: int = 500
    mu: float = 0.5
    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.reg < 0:
            raise ValueError("reg must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must be in [0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class FactorParams:
    """Dense factors: user P, item Q, explanation OU/OI, biases bU/bI/b_item."""

    P: np.ndarray
    Q: np.ndarray
    OU: np.ndarray
    OI: np.ndarray
    bU: np.ndarray
    bI: np.ndarray
    b_item: np.ndarray

    @property
    def d(self) -> int:
        return self.P.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "P": self.P, "Q": self.Q, "OU": self.OU, "OI": self.OI,
            "bU": self.bU, "bI": self.bI, "b_item": self.b_item,
        }

    def copy(self) -> "FactorParams":
        return FactorParams(**{k: v.copy() for k, v in self.arrays().items()})

    def check_finite(self) -> None:
        for name, arr in self.arrays().items():
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite entries in {name}")


@dataclass
class CDParams:
    """Triple-product factors of shared dimension."""

    P: np.ndarray
    Q: np.ndarray
    O: np.ndarray

    @property
    def d(self) -> int:
        return self.P.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"P": self.P, "Q": self.Q, "O": self.O}

    def copy(self) -> "CDParams":
        return CDParams(self.P.copy(), self.Q.copy(), self.O.copy())

    def check_finite(self) -> None:
        for name, arr in self.arrays().items():
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite entries in {name}")


@dataclass
class EmbeddingTable:
    """Frozen per-explanation semantic vectors plus a learnable projection.

    ``raw`` rows never train; the projection ``W, c`` maps them to the
    factor dimension.  The projected vector for explanation e is
    ``W @ raw[e] + c``.
    """

    raw: np.ndarray
    W: np.ndarray
    c: np.ndarray
    tag: str = ""

    @property
    def d_emb(self) -> int:
        return self.raw.shape[1]

    def projected(self, e: int) -> np.ndarray:
        return self.W @ np.asarray(self.raw[e], dtype=np.float64) + self.c

    def projected_all(self) -> np.ndarray:
        """n_explanations x d matrix of projected vectors."""
        return np.asarray(self.raw, dtype=np.float64) @ self.W.T + self.c


def init_factor_params(
    store: InteractionStore, hp: Hyperparams, init_scale: float = 0.1,
) -> FactorParams:
    """Gaussian(0, init_scale^2) factors, zero biases; seeded by hp.seed."""
    rng = np.random.default_rng([hp.seed, 0])
    d = hp.d
    return FactorParams(
        P=rng.normal(0.0, init_scale, size=(store.n_users, d)),
        Q=rng.normal(0.0, init_scale, size=(store.n_items, d)),
        OU=rng.normal(0.0, init_scale, size=(store.n_explanations, d)),
        OI=rng.normal(0.0, init_scale, size=(store.n_explanations, d)),
        bU=np.zeros(store.n_explanations),
        bI=np.zeros(store.n_explanations),
        b_item=np.zeros(store.n_items),
    )


def init_cd_params(
    store: InteractionStore, hp: Hyperparams, init_scale: float = 0.1,
) -> CDParams:
    rng = np.random.default_rng([hp.seed, 0])
    d = hp.d
    return CDParams(
        P=rng.normal(0.0, init_scale, size=(store.n_users, d)),
        Q=rng.normal(0.0, init_scale, size=(store.n_items, d)),
        O=rng.normal(0.0, init_scale, size=(store.n_explanations, d)),
    )


def init_projection(
    hp: Hyperparams, d_emb: int, init_scale: float = 0.1,
) -> tuple[np.ndarray, np.ndarray]:
    """Initial projection: small Gaussian W, all-ones bias.

    The all-ones bias makes the element-wise enhanced score start out
    close to the plain ID-based score.
    """
    rng = np.random.default_rng([hp.seed, 2])
    W = rng.normal(0.0, init_scale / np.sqrt(d_emb), size=(hp.d, d_emb))
    return W, np.ones(hp.d)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def score_user_expl(fp: FactorParams, u: int, e: int) -> float:
    """User-side explanation affinity p_u . o_e^U + b_e^U."""
    return float(fp.P[u] @ fp.OU[e] + fp.bU[e])


def score_item_expl(fp: FactorParams, i: int, e: int) -> float:
    """Item-side explanation affinity q_i . o_e^I + b_e^I."""
    return float(fp.Q[i] @ fp.OI[e] + fp.bI[e])


def score_bper(fp: FactorParams, u: int, i: int, e: int, mu: float) -> float:
    """Blend of the two sides: mu * user score + (1 - mu) * item score."""
    return mu * score_user_expl(fp, u, e) + (1.0 - mu) * score_item_expl(fp, i, e)


def score_bper_plus(
    fp: FactorParams, emb: EmbeddingTable, u: int, i: int, e: int, mu: float,
) -> float:
    """As score_bper with o^U, o^I gated element-wise by the projected
    semantic vector of e."""
    g = emb.projected(e)
    if g.shape[0] != fp.d:
        raise ValueError(f"projection dim {g.shape[0]} != factor dim {fp.d}")
    user = float(fp.P[u] @ (fp.OU[e] * g) + fp.bU[e])
    item = float(fp.Q[i] @ (fp.OI[e] * g) + fp.bI[e])
    return mu * user + (1.0 - mu) * item


def score_cd(cd: CDParams, u: int, i: int, e: int) -> float:
    """Triple element-wise product summed over the factor dimension."""
    return float(np.sum(cd.P[u] * cd.Q[i] * cd.O[e]))


def score_pitf(fp: FactorParams, u: int, i: int, e: int) -> float:
    """Sum of user-explanation and item-explanation inner products, no biases."""
    return float(fp.P[u] @ fp.OU[e] + fp.Q[i] @ fp.OI[e])


def score_item(fp: FactorParams, u: int, i: int) -> float:
    """Item-ranking score p_u . q_i + b_i."""
    return float(fp.P[u] @ fp.Q[i] + fp.b_item[i])


# ---------------------------------------------------------------------------
# Rewrites into the triple-product form
# ---------------------------------------------------------------------------

def _blend_blocks(fp: FactorParams, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """User/item factor blocks of the 2d+2 triple-product construction.

    Layout: slots [0,d) carry the user side, [d,2d) the item side, slot
    2d the user bias, slot 2d+1 the item bias.  Constant slots are
    chosen so the three-way product reproduces the blended score: each
    side's factors appear scaled by its blend weight in exactly one
    block, with ones in the complementary block, and the bias slots
    multiply out to mu and (1 - mu) respectively.
    """
    n_users, d = fp.P.shape
    n_items = fp.Q.shape[0]
    p = np.ones((n_users, 2 * d + 2))
    q = np.ones((n_items, 2 * d + 2))
    p[:, :d] = mu * fp.P
    p[:, 2 * d] = mu
    q[:, d:2 * d] = (1.0 - mu) * fp.Q
    q[:, 2 * d + 1] = 1.0 - mu
    return p, q


def embed_bper_into_cd(fp: FactorParams, mu: float) -> CDParams:
    """Rewrite the two-factorization model as one triple-product model
    of dimension 2d+2 with identical scores."""
    d = fp.d
    p, q = _blend_blocks(fp, mu)
    o = np.empty((fp.OU.shape[0], 2 * d + 2))
    o[:, :d] = fp.OU
    o[:, d:2 * d] = fp.OI
    o[:, 2 * d] = fp.bU
    o[:, 2 * d + 1] = fp.bI
    return CDParams(p, q, o)


def embed_bper_plus_into_cd(
    fp: FactorParams, emb: EmbeddingTable, mu: float,
) -> CDParams:
    """As embed_bper_into_cd, with the explanation blocks gated by the
    projected semantic vectors."""
    cd = embed_bper_into_cd(fp, mu)
    d = fp.d
    g = emb.projected_all()
    cd.O[:, :d] *= g
    cd.O[:, d:2 * d] *= g
    return cd


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params, kind: str, meta: dict | None = None) -> None:
    """Write params to a versioned .npz container with shape-bearing arrays."""
    payload: dict[str, np.ndarray] = {
        f"arr_{k}": v for k, v in params.arrays().items()
    }
    payload["version"] = np.asarray(CHECKPOINT_VERSION)
    payload["kind"] = np.asarray(kind)
    for k, v in (meta or {}).items():
        payload[f"meta_{k}"] = np.asarray(v)
    np.savez_compressed(path, **payload)


def load_checkpoint(path):
    """Read a checkpoint; returns (params, kind, meta)."""
    with np.load(path, allow_pickle=False) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        kind = str(z["kind"])
        arrays = {
            k[len("arr_"):]: z[k] for k in z.files if k.startswith("arr_")
        }
        meta = {
            k[len("meta_"):]: z[k][()] for k in z.files if k.startswith("meta_")
        }
    if set(arrays) == {"P", "Q", "O"}:
        params = CDParams(**arrays)
    else:
        params = FactorParams(**arrays)
    return params, kind, meta
