"""Sampled pairwise-ranking SGD trainers.

Every trainer runs exactly ``epochs`` passes of ``triple_count`` sampled
steps.  A step draws one observed triple plus negatives by rejection
from the stated complement sets, then applies the per-sample update
rules.  Gradients are always taken at the pre-step parameter values
(rows are snapshotted before any write), so a single step equals one
exact SGD step on the sampled pairwise loss; the test suite checks this
against central finite differences.  Regularization is applied to each
sampled parameter inside the step, not as a global pass.
"""

from __future__ import annotations

import math
import sys
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .data import InteractionStore
from .params import (
    CDParams,
    EmbeddingTable,
    FactorParams,
    Hyperparams,
    init_cd_params,
    init_factor_params,
    init_projection,
)


def sigmoid(r: float) -> float:
    """Numerically stable logistic function (scalar)."""
    if r >= 0.0:
        return 1.0 / (1.0 + math.exp(-r))
    z = math.exp(r)
    return z / (1.0 + z)


def sigmoid_array(r: np.ndarray) -> np.ndarray:
    """Stable logistic function over an array."""
    r = np.asarray(r, dtype=np.float64)
    out = np.empty_like(r)
    pos = r >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-r[pos]))
    z = np.exp(r[~pos])
    out[~pos] = z / (1.0 + z)
    return out


def softplus(r: float) -> float:
    """log(1 + exp(r)) without overflow; -ln sigmoid(x) = softplus(-x)."""
    if r > 0.0:
        return r + math.log1p(math.exp(-r))
    return math.log1p(math.exp(r))


class Sampler:
    """Uniform draws over triples and over complement sets by rejection.

    Rejection keeps the draw exactly uniform on the complement; with the
    sparsity typical of this data the expected number of retries is
    negligible.
    """

    def __init__(self, store: InteractionStore, rng: np.random.Generator):
        self.store = store
        self.rng = rng

    def triple_batch(self, size: int) -> np.ndarray:
        return self.rng.integers(0, self.store.triple_count, size=size)

    def expl_not_in(self, excluded: frozenset[int]) -> int:
        n = self.store.n_explanations
        while True:
            e = int(self.rng.integers(0, n))
            if e not in excluded:
                return e

    def item_not_in(self, excluded: frozenset[int]) -> int:
        n = self.store.n_items
        while True:
            i = int(self.rng.integers(0, n))
            if i not in excluded:
                return i


@dataclass
class TrainReport:
    """Per-epoch running-mean sampled losses, timings, and final parameters."""

    epoch_losses: list[float]
    wall_time_per_epoch: list[float]
    final_params: FactorParams | CDParams
    skipped_samples: int = 0
    notes: tuple[str, ...] = ()
    projection: tuple[np.ndarray, np.ndarray] | None = None


# ---------------------------------------------------------------------------
# Per-sample update steps.  Each mutates params in place and returns the
# sampled data loss before the step.
# ---------------------------------------------------------------------------

def step_bper(fp, u, i, e, e1, e2, gamma, reg):
    p_u = fp.P[u].copy()
    q_i = fp.Q[i].copy()
    ou_e, ou_e1 = fp.OU[e].copy(), fp.OU[e1].copy()
    oi_e, oi_e2 = fp.OI[e].copy(), fp.OI[e2].copy()
    du = ou_e - ou_e1
    di = oi_e - oi_e2
    r_u = float(p_u @ du) + fp.bU[e] - fp.bU[e1]
    r_i = float(q_i @ di) + fp.bI[e] - fp.bI[e2]
    x = -sigmoid(-r_u)
    y = -sigmoid(-r_i)
    fp.P[u] -= gamma * (x * du + reg * p_u)
    fp.Q[i] -= gamma * (y * di + reg * q_i)
    fp.OU[e] -= gamma * (x * p_u + reg * ou_e)
    fp.OU[e1] -= gamma * (-x * p_u + reg * ou_e1)
    fp.OI[e] -= gamma * (y * q_i + reg * oi_e)
    fp.OI[e2] -= gamma * (-y * q_i + reg * oi_e2)
    fp.bU[e] -= gamma * (x + reg * fp.bU[e])
    fp.bU[e1] -= gamma * (-x + reg * fp.bU[e1])
    fp.bI[e] -= gamma * (y + reg * fp.bI[e])
    fp.bI[e2] -= gamma * (-y + reg * fp.bI[e2])
    return softplus(-r_u) + softplus(-r_i)


def step_bper_j(fp, u, i, e, e1, e2, i1, gamma, reg, alpha):
    p_u = fp.P[u].copy()
    q_i, q_i1 = fp.Q[i].copy(), fp.Q[i1].copy()
    ou_e, ou_e1 = fp.OU[e].copy(), fp.OU[e1].copy()
    oi_e, oi_e2 = fp.OI[e].copy(), fp.OI[e2].copy()
    du = ou_e - ou_e1
    di = oi_e - oi_e2
    dq = q_i - q_i1
    r_u = float(p_u @ du) + fp.bU[e] - fp.bU[e1]
    r_i = float(q_i @ di) + fp.bI[e] - fp.bI[e2]
    r_rec = float(p_u @ dq) + fp.b_item[i] - fp.b_item[i1]
    x = -alpha * sigmoid(-r_u)
    y = -alpha * sigmoid(-r_i)
    z = -sigmoid(-r_rec)
    fp.P[u] -= gamma * (x * du + z * dq + reg * p_u)
    fp.Q[i] -= gamma * (y * di + z * p_u + reg * q_i)
    fp.Q[i1] -= gamma * (-z * p_u + reg * q_i1)
    fp.OU[e] -= gamma * (x * p_u + reg * ou_e)
    fp.OU[e1] -= gamma * (-x * p_u + reg * ou_e1)
    fp.OI[e] -= gamma * (y * q_i + reg * oi_e)
    fp.OI[e2] -= gamma * (-y * q_i + reg * oi_e2)
    fp.b_item[i] -= gamma * (z + reg * fp.b_item[i])
    fp.b_item[i1] -= gamma * (-z + reg * fp.b_item[i1])
    fp.bU[e] -= gamma * (x + reg * fp.bU[e])
    fp.bU[e1] -= gamma * (-x + reg * fp.bU[e1])
    fp.bI[e] -= gamma * (y + reg * fp.bI[e])
    fp.bI[e2] -= gamma * (-y + reg * fp.bI[e2])
    return softplus(-r_rec) + alpha * (softplus(-r_u) + softplus(-r_i))


def step_cd(cd, u, i, e, e1, gamma, reg):
    p_u = cd.P[u].copy()
    q_i = cd.Q[i].copy()
    o_e, o_e1 = cd.O[e].copy(), cd.O[e1].copy()
    pq = p_u * q_i
    do = o_e - o_e1
    r = float(pq @ do)
    s = -sigmoid(-r)
    cd.P[u] -= gamma * (s * (q_i * do) + reg * p_u)
    cd.Q[i] -= gamma * (s * (p_u * do) + reg * q_i)
    cd.O[e] -= gamma * (s * pq + reg * o_e)
    cd.O[e1] -= gamma * (-s * pq + reg * o_e1)
    return softplus(-r)


def step_pitf(fp, u, i, e, e1, gamma, reg):
    p_u = fp.P[u].copy()
    q_i = fp.Q[i].copy()
    ou_e, ou_e1 = fp.OU[e].copy(), fp.OU[e1].copy()
    oi_e, oi_e1 = fp.OI[e].copy(), fp.OI[e1].copy()
    du = ou_e - ou_e1
    di = oi_e - oi_e1
    r = float(p_u @ du) + float(q_i @ di)
    s = -sigmoid(-r)
    fp.P[u] -= gamma * (s * du + reg * p_u)
    fp.Q[i] -= gamma * (s * di + reg * q_i)
    fp.OU[e] -= gamma * (s * p_u + reg * ou_e)
    fp.OU[e1] -= gamma * (-s * p_u + reg * ou_e1)
    fp.OI[e] -= gamma * (s * q_i + reg * oi_e)
    fp.OI[e1] -= gamma * (-s * q_i + reg * oi_e1)
    return softplus(-r)


def step_cd_j(cd, u, i, e, e1, i1, gamma, reg, alpha):
    p_u = cd.P[u].copy()
    q_i, q_i1 = cd.Q[i].copy(), cd.Q[i1].copy()
    o_e, o_e1 = cd.O[e].copy(), cd.O[e1].copy()
    pq = p_u * q_i
    do = o_e - o_e1
    dq = q_i - q_i1
    r_exp = float(pq @ do)
    r_rec = float(p_u @ dq)
    s = -alpha * sigmoid(-r_exp)
    z = -sigmoid(-r_rec)
    cd.P[u] -= gamma * (s * (q_i * do) + z * dq + reg * p_u)
    cd.Q[i] -= gamma * (s * (p_u * do) + z * p_u + reg * q_i)
    cd.Q[i1] -= gamma * (-z * p_u + reg * q_i1)
    cd.O[e] -= gamma * (s * pq + reg * o_e)
    cd.O[e1] -= gamma * (-s * pq + reg * o_e1)
    return softplus(-r_rec) + alpha * softplus(-r_exp)


def step_pitf_j(fp, u, i, e, e1, i1, gamma, reg, alpha):
    p_u = fp.P[u].copy()
    q_i, q_i1 = fp.Q[i].copy(), fp.Q[i1].copy()
    ou_e, ou_e1 = fp.OU[e].copy(), fp.OU[e1].copy()
    oi_e, oi_e1 = fp.OI[e].copy(), fp.OI[e1].copy()
    du = ou_e - ou_e1
    di = oi_e - oi_e1
    dq = q_i - q_i1
    r_exp = float(p_u @ du) + float(q_i @ di)
    r_rec = float(p_u @ dq)
    s = -alpha * sigmoid(-r_exp)
    z = -sigmoid(-r_rec)
    fp.P[u] -= gamma * (s * du + z * dq + reg * p_u)
    fp.Q[i] -= gamma * (s * di + z * p_u + reg * q_i)
    fp.Q[i1] -= gamma * (-z * p_u + reg * q_i1)
    fp.OU[e] -= gamma * (s * p_u + reg * ou_e)
    fp.OU[e1] -= gamma * (-s * p_u + reg * ou_e1)
    fp.OI[e] -= gamma * (s * q_i + reg * oi_e)
    fp.OI[e1] -= gamma * (-s * q_i + reg * oi_e1)
    return softplus(-r_rec) + alpha * softplus(-r_exp)


def step_bper_plus(fp, emb, u, i, e, e1, e2, gamma, reg, train_projection=True):
    p_u = fp.P[u].copy()
    q_i = fp.Q[i].copy()
    ou_e, ou_e1 = fp.OU[e].copy(), fp.OU[e1].copy()
    oi_e, oi_e2 = fp.OI[e].copy(), fp.OI[e2].copy()
    v_e = np.asarray(emb.raw[e], dtype=np.float64)
    v_e1 = np.asarray(emb.raw[e1], dtype=np.float64)
    v_e2 = np.asarray(emb.raw[e2], dtype=np.float64)
    W, c = emb.W, emb.c
    g_e = W @ v_e + c
    g_e1 = W @ v_e1 + c
    g_e2 = W @ v_e2 + c
    du = ou_e * g_e - ou_e1 * g_e1
    di = oi_e * g_e - oi_e2 * g_e2
    r_u = float(p_u @ du) + fp.bU[e] - fp.bU[e1]
    r_i = float(q_i @ di) + fp.bI[e] - fp.bI[e2]
    x = -sigmoid(-r_u)
    y = -sigmoid(-r_i)
    fp.P[u] -= gamma * (x * du + reg * p_u)
    fp.Q[i] -= gamma * (y * di + reg * q_i)
    fp.OU[e] -= gamma * (x * (p_u * g_e) + reg * ou_e)
    fp.OU[e1] -= gamma * (-x * (p_u * g_e1) + reg * ou_e1)
    fp.OI[e] -= gamma * (y * (q_i * g_e) + reg * oi_e)
    fp.OI[e2] -= gamma * (-y * (q_i * g_e2) + reg * oi_e2)
    fp.bU[e] -= gamma * (x + reg * fp.bU[e])
    fp.bU[e1] -= gamma * (-x + reg * fp.bU[e1])
    fp.bI[e] -= gamma * (y + reg * fp.bI[e])
    fp.bI[e2] -= gamma * (-y + reg * fp.bI[e2])
    if train_projection:
        dg_e = x * (p_u * ou_e) + y * (q_i * oi_e)
        dg_e1 = -x * (p_u * ou_e1)
        dg_e2 = -y * (q_i * oi_e2)
        dW = np.outer(dg_e, v_e) + np.outer(dg_e1, v_e1) + np.outer(dg_e2, v_e2)
        dW += reg * W
        dc = dg_e + dg_e1 + dg_e2 + reg * c
        W -= gamma * dW
        c -= gamma * dc
    return softplus(-r_u) + softplus(-r_i)


# ---------------------------------------------------------------------------
# Trainers
# ---------------------------------------------------------------------------

def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _log_epoch(epoch, loss, seconds):
    print(f"epoch {epoch}  loss {loss:.6f}  wall {seconds:.2f}s", file=sys.stderr)


def _epoch_loop(train, hp, body, params, log_every=0):
    """Shared epoch/step scaffolding; ``body(u, i, e)`` runs one step and
    returns its loss, or None when the sample must be skipped.  Parameter
    finiteness is asserted after every epoch."""
    rng = np.random.default_rng([hp.seed, 1])
    sampler = Sampler(train, rng)
    n_steps = train.triple_count
    losses, times = [], []
    skipped = 0
    for epoch in range(hp.epochs):
        t0 = time.perf_counter()
        batch = sampler.triple_batch(n_steps)
        us = train.triple_users[batch].tolist()
        is_ = train.triple_items[batch].tolist()
        es = train.triple_expls[batch].tolist()
        total, steps = 0.0, 0
        for u, i, e in zip(us, is_, es):
            loss = body(sampler, u, i, e)
            if loss is None:
                skipped += 1
                continue
            total += loss
            steps += 1
        params.check_finite()
        losses.append(total / steps if steps else float("nan"))
        times.append(time.perf_counter() - t0)
        if log_every and (epoch + 1) % log_every == 0:
            _log_epoch(epoch + 1, losses[-1], times[-1])
    if skipped:
        warnings.warn(f"skipped {skipped} samples with exhausted complement sets")
    return losses, times, skipped


def train_bper(
    train: InteractionStore, hp: Hyperparams, init_scale: float = 0.1,
    log_every: int = 0,
) -> TrainReport:
    """Explanation-ranking SGD over user-side and item-side pairwise tasks.

    The two tasks are weighted equally during training; the blend weight
    only enters at inference.
    """
    _require(train.n_explanations >= 2, "need at least 2 explanations")
    _require(train.triple_count >= 1, "empty training store")
    fp = init_factor_params(train, hp, init_scale)
    E_u, E_i = train.expls_of_user, train.expls_of_item
    n_e, gamma, reg = train.n_explanations, hp.gamma, hp.reg

    def body(sampler, u, i, e):
        eu, ei = E_u[u], E_i[i]
        if len(eu) == n_e or len(ei) == n_e:
            return None
        e1 = sampler.expl_not_in(eu)
        e2 = sampler.expl_not_in(ei)
        return step_bper(fp, u, i, e, e1, e2, gamma, reg)

    losses, times, skipped = _epoch_loop(train, hp, body, fp, log_every)
    return TrainReport(losses, times, fp, skipped)


def train_bper_j(
    train: InteractionStore, hp: Hyperparams, init_scale: float = 0.1,
    log_every: int = 0,
) -> TrainReport:
    """Joint item-plus-explanation ranking; the explanation terms are
    weighted by alpha, the item term by 1."""
    _require(train.n_explanations >= 2, "need at least 2 explanations")
    _require(train.n_items >= 2, "need at least 2 items")
    _require(train.triple_count >= 1, "empty training store")
    fp = init_factor_params(train, hp, init_scale)
    E_u, E_i, I_u = train.expls_of_user, train.expls_of_item, train.items_of_user
    n_e, n_i = train.n_explanations, train.n_items
    gamma, reg, alpha = hp.gamma, hp.reg, hp.alpha

    def body(sampler, u, i, e):
        eu, ei, iu = E_u[u], E_i[i], I_u[u]
        if len(eu) == n_e or len(ei) == n_e or len(iu) == n_i:
            return None
        e1 = sampler.expl_not_in(eu)
        e2 = sampler.expl_not_in(ei)
        i1 = sampler.item_not_in(iu)
        return step_bper_j(fp, u, i, e, e1, e2, i1, gamma, reg, alpha)

    losses, times, skipped = _epoch_loop(train, hp, body, fp, log_every)
    notes = ()
    if hp.alpha == 0.0:
        notes = (
            "alpha=0: explanation factors and biases received "
            "regularization-only decay; item ranking reduced to plain "
            "pairwise matrix factorization",
        )
    return TrainReport(losses, times, fp, skipped, notes)


def _train_single_score(train, hp, init_params, step, init_scale, log_every):
    """Shared trainer for models with one score per triple; negatives are
    drawn from the complement of the pair's own explanation set."""
    _require(train.n_explanations >= 2, "need at least 2 explanations")
    _require(train.triple_count >= 1, "empty training store")
    params = init_params(train, hp, init_scale)
    pair_expls = train.pair_expls
    n_e, gamma, reg = train.n_explanations, hp.gamma, hp.reg

    def body(sampler, u, i, e):
        eui = pair_expls[(u, i)]
        if len(eui) == n_e:
            return None
        e1 = sampler.expl_not_in(eui)
        return step(params, u, i, e, e1, gamma, reg)

    losses, times, skipped = _epoch_loop(train, hp, body, params, log_every)
    return TrainReport(losses, times, params, skipped)


def train_cd(train, hp, init_scale=0.1, log_every=0) -> TrainReport:
    """Single triple-product score trained on pairwise explanation ranking."""
    return _train_single_score(train, hp, init_cd_params, step_cd, init_scale, log_every)


def train_pitf(train, hp, init_scale=0.1, log_every=0) -> TrainReport:
    """Bias-free two-inner-product score under the same objective as train_cd."""
    return _train_single_score(
        train, hp, init_factor_params, step_pitf, init_scale, log_every
    )


def _train_joint_single_score(train, hp, init_params, step, init_scale, log_every):
    _require(train.n_explanations >= 2, "need at least 2 explanations")
    _require(train.n_items >= 2, "need at least 2 items")
    _require(train.triple_count >= 1, "empty training store")
    params = init_params(train, hp, init_scale)
    pair_expls, I_u = train.pair_expls, train.items_of_user
    n_e, n_i = train.n_explanations, train.n_items
    gamma, reg, alpha = hp.gamma, hp.reg, hp.alpha

    def body(sampler, u, i, e):
        eui, iu = pair_expls[(u, i)], I_u[u]
        if len(eui) == n_e or len(iu) == n_i:
            return None
        e1 = sampler.expl_not_in(eui)
        i1 = sampler.item_not_in(iu)
        return step(params, u, i, e, e1, i1, gamma, reg, alpha)

    losses, times, skipped = _epoch_loop(train, hp, body, params, log_every)
    notes = ()
    if hp.alpha == 0.0:
        notes = (
            "alpha=0: explanation factors received regularization-only "
            "decay; training reduced to plain pairwise matrix factorization",
        )
    return TrainReport(losses, times, params, skipped, notes)


def train_cd_j(train, hp, init_scale=0.1, log_every=0) -> TrainReport:
    return _train_joint_single_score(
        train, hp, init_cd_params, step_cd_j, init_scale, log_every
    )


def train_pitf_j(train, hp, init_scale=0.1, log_every=0) -> TrainReport:
    return _train_joint_single_score(
        train, hp, init_factor_params, step_pitf_j, init_scale, log_every
    )


def train_bper_plus(
    train: InteractionStore, hp: Hyperparams, emb: EmbeddingTable,
    init_scale: float = 0.1, log_every: int = 0, train_projection: bool = True,
) -> TrainReport:
    """As train_bper, with explanation factors gated by projected semantic
    vectors; gradients also flow into the projection (raw vectors stay
    frozen) unless ``train_projection`` is off."""
    _require(train.n_explanations >= 2, "need at least 2 explanations")
    _require(train.triple_count >= 1, "empty training store")
    if emb.raw.shape[0] != train.n_explanations:
        raise ValueError(
            f"embedding table has {emb.raw.shape[0]} rows for "
            f"{train.n_explanations} explanations"
        )
    if emb.W.shape != (hp.d, emb.d_emb):
        raise ValueError(f"projection shape {emb.W.shape} != ({hp.d}, {emb.d_emb})")
    fp = init_factor_params(train, hp, init_scale)
    E_u, E_i = train.expls_of_user, train.expls_of_item
    n_e, gamma, reg = train.n_explanations, hp.gamma, hp.reg

    def body(sampler, u, i, e):
        eu, ei = E_u[u], E_i[i]
        if len(eu) == n_e or len(ei) == n_e:
            return None
        e1 = sampler.expl_not_in(eu)
        e2 = sampler.expl_not_in(ei)
        return step_bper_plus(
            fp, emb, u, i, e, e1, e2, gamma, reg, train_projection
        )

    losses, times, skipped = _epoch_loop(train, hp, body, fp, log_every)
    if not (np.isfinite(emb.W).all() and np.isfinite(emb.c).all()):
        raise FloatingPointError("non-finite entries in projection")
    return TrainReport(losses, times, fp, skipped, projection=(emb.W, emb.c))


def holdout_bper_loss(
    fp: FactorParams, store: InteractionStore, n_samples: int, seed: int,
) -> float:
    """Mean sampled pairwise loss of fixed parameters on a held-out store."""
    rng = np.random.default_rng(seed)
    sampler = Sampler(store, rng)
    batch = sampler.triple_batch(n_samples)
    total, n = 0.0, 0
    for t in batch:
        u = int(store.triple_users[t])
        i = int(store.triple_items[t])
        e = int(store.triple_expls[t])
        eu, ei = store.expls_of_user[u], store.expls_of_item[i]
        if len(eu) == store.n_explanations or len(ei) == store.n_explanations:
            continue
        e1 = sampler.expl_not_in(eu)
        e2 = sampler.expl_not_in(ei)
        r_u = float(fp.P[u] @ (fp.OU[e] - fp.OU[e1])) + fp.bU[e] - fp.bU[e1]
        r_i = float(fp.Q[i] @ (fp.OI[e] - fp.OI[e2])) + fp.bI[e] - fp.bI[e2]
        total += softplus(-r_u) + softplus(-r_i)
        n += 1
    return total / max(n, 1)
