"""Trainer correctness: finite-difference gradient oracles, determinism,
sampling uniformity, and the degenerate-parameter behaviours."""

import math

import numpy as np
import pytest

from exprank.data import InteractionStore
from exprank.params import Hyperparams, init_factor_params
from exprank.training import (
    Sampler,
    holdout_bper_loss,
    sigmoid,
    sigmoid_array,
    softplus,
    step_bper,
    step_bper_j,
    step_bper_plus,
    step_cd,
    step_cd_j,
    step_pitf,
    step_pitf_j,
    train_bper,
    train_bper_j,
    train_bper_plus,
    train_cd,
    train_cd_j,
    train_pitf,
    train_pitf_j,
)

from test_params import random_embedding, random_factor_params, N_EXPL, N_ITEMS, N_USERS, D


def toy_store():
    triples = [
        (0, 0, 0), (0, 0, 1), (0, 1, 2),
        (1, 1, 1), (1, 2, 3), (2, 0, 4),
        (2, 2, 0), (3, 1, 4), (3, 2, 2),
    ]
    return InteractionStore.from_triples(
        triples, n_users=N_USERS, n_items=N_ITEMS, n_explanations=N_EXPL
    )


def random_cd_params(seed=0):
    rng = np.random.default_rng(seed)
    from exprank.params import CDParams

    return CDParams(
        P=rng.normal(size=(N_USERS, D)),
        Q=rng.normal(size=(N_ITEMS, D)),
        O=rng.normal(size=(N_EXPL, D)),
    )


def sp(x):
    # independent stable softplus for the oracle losses
    return float(np.logaddexp(0.0, x))


def numerical_gradient(loss, arrays, h=1e-5):
    """Central finite differences of loss() w.r.t. every array entry."""
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.ravel(), g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss()
            flat[idx] = orig - h
            lm = loss()
            flat[idx] = orig
            gflat[idx] = (lp - lm) / (2.0 * h)
        grads[name] = g
    return grads


def check_step_against_fd(arrays, loss, apply_step, gamma, reg, touched,
                          rtol=1e-3):
    """The applied update must equal -gamma * (fd gradient + reg * theta),
    with the regularization term landing only on the sampled entries
    (``touched`` maps array name -> row indices, or "all")."""
    before = {k: v.copy() for k, v in arrays.items()}
    fd = numerical_gradient(loss, arrays)
    expected = {k: g.copy() for k, g in fd.items()}
    for name, rows in touched.items():
        if rows == "all":
            expected[name] += reg * before[name]
        else:
            for r in set(rows):
                expected[name][r] += reg * before[name][r]
    apply_step()
    scale = max(max(np.max(np.abs(expected[k])) for k in arrays), 1e-8)
    for name in arrays:
        update = (before[name] - arrays[name]) / gamma
        err = np.max(np.abs(update - expected[name]))
        assert err <= rtol * scale, f"{name}: fd mismatch {err:.3e}"


def draw_sample(store, rng, joint=False, pair_negatives=False):
    t = int(rng.integers(0, store.triple_count))
    u = int(store.triple_users[t])
    i = int(store.triple_items[t])
    e = int(store.triple_expls[t])
    if pair_negatives:
        pool = [x for x in range(store.n_explanations)
                if x not in store.pair_expls[(u, i)]]
        e1 = int(rng.choice(pool))
        e2 = None
    else:
        pool_u = [x for x in range(store.n_explanations)
                  if x not in store.expls_of_user[u]]
        pool_i = [x for x in range(store.n_explanations)
                  if x not in store.expls_of_item[i]]
        e1 = int(rng.choice(pool_u))
        e2 = int(rng.choice(pool_i))
    i1 = None
    if joint:
        pool_items = [x for x in range(store.n_items)
                      if x not in store.items_of_user[u]]
        i1 = int(rng.choice(pool_items))
    return u, i, e, e1, e2, i1


GAMMA, REG = 0.05, 0.02


class TestGradientOracle:
    """Analytic per-sample updates vs central finite differences."""

    @pytest.mark.parametrize("seed", range(20))
    def test_bper(self, seed):
        store = toy_store()
        rng = np.random.default_rng(seed)
        fp = random_factor_params(seed)
        u, i, e, e1, e2, _ = draw_sample(store, rng)

        def loss():
            r_u = (fp.P[u] @ fp.OU[e] + fp.bU[e]
                   - fp.P[u] @ fp.OU[e1] - fp.bU[e1])
            r_i = (fp.Q[i] @ fp.OI[e] + fp.bI[e]
                   - fp.Q[i] @ fp.OI[e2] - fp.bI[e2])
            return sp(-r_u) + sp(-r_i)

        arrays = {k: v for k, v in fp.arrays().items() if k != "b_item"}
        touched = {"P": [u], "Q": [i], "OU": [e, e1], "OI": [e, e2],
                   "bU": [e, e1], "bI": [e, e2]}
        check_step_against_fd(
            arrays, loss,
            lambda: step_bper(fp, u, i, e, e1, e2, GAMMA, REG), GAMMA, REG,
            touched,
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_bper_j(self, seed):
        store = toy_store()
        rng = np.random.default_rng(100 + seed)
        fp = random_factor_params(seed)
        alpha = float(rng.uniform(0.1, 1.0))
        u, i, e, e1, e2, i1 = draw_sample(store, rng, joint=True)

        def loss():
            r_u = (fp.P[u] @ fp.OU[e] + fp.bU[e]
                   - fp.P[u] @ fp.OU[e1] - fp.bU[e1])
            r_i = (fp.Q[i] @ fp.OI[e] + fp.bI[e]
                   - fp.Q[i] @ fp.OI[e2] - fp.bI[e2])
            r_rec = (fp.P[u] @ fp.Q[i] + fp.b_item[i]
                     - fp.P[u] @ fp.Q[i1] - fp.b_item[i1])
            return sp(-r_rec) + alpha * (sp(-r_u) + sp(-r_i))

        touched = {"P": [u], "Q": [i, i1], "OU": [e, e1], "OI": [e, e2],
                   "bU": [e, e1], "bI": [e, e2], "b_item": [i, i1]}
        check_step_against_fd(
            fp.arrays(), loss,
            lambda: step_bper_j(fp, u, i, e, e1, e2, i1, GAMMA, REG, alpha),
            GAMMA, REG, touched,
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_cd(self, seed):
        store = toy_store()
        rng = np.random.default_rng(200 + seed)
        cd = random_cd_params(seed)
        u, i, e, e1, _, _ = draw_sample(store, rng, pair_negatives=True)

        def loss():
            r = float(np.sum(cd.P[u] * cd.Q[i] * (cd.O[e] - cd.O[e1])))
            return sp(-r)

        touched = {"P": [u], "Q": [i], "O": [e, e1]}
        check_step_against_fd(
            cd.arrays(), loss,
            lambda: step_cd(cd, u, i, e, e1, GAMMA, REG), GAMMA, REG, touched,
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_pitf(self, seed):
        store = toy_store()
        rng = np.random.default_rng(300 + seed)
        fp = random_factor_params(seed, zero_bias=True)
        u, i, e, e1, _, _ = draw_sample(store, rng, pair_negatives=True)

        def loss():
            r = (fp.P[u] @ (fp.OU[e] - fp.OU[e1])
                 + fp.Q[i] @ (fp.OI[e] - fp.OI[e1]))
            return sp(-r)

        arrays = {k: fp.arrays()[k] for k in ("P", "Q", "OU", "OI")}
        touched = {"P": [u], "Q": [i], "OU": [e, e1], "OI": [e, e1]}
        check_step_against_fd(
            arrays, loss,
            lambda: step_pitf(fp, u, i, e, e1, GAMMA, REG), GAMMA, REG,
            touched,
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_cd_j(self, seed):
        store = toy_store()
        rng = np.random.default_rng(400 + seed)
        cd = random_cd_params(seed)
        alpha = float(rng.uniform(0.1, 1.0))
        u, i, e, e1, _, i1 = draw_sample(store, rng, joint=True, pair_negatives=True)

        def loss():
            r_exp = float(np.sum(cd.P[u] * cd.Q[i] * (cd.O[e] - cd.O[e1])))
            r_rec = float(cd.P[u] @ (cd.Q[i] - cd.Q[i1]))
            return sp(-r_rec) + alpha * sp(-r_exp)

        touched = {"P": [u], "Q": [i, i1], "O": [e, e1]}
        check_step_against_fd(
            cd.arrays(), loss,
            lambda: step_cd_j(cd, u, i, e, e1, i1, GAMMA, REG, alpha),
            GAMMA, REG, touched,
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_pitf_j(self, seed):
        store = toy_store()
        rng = np.random.default_rng(500 + seed)
        fp = random_factor_params(seed, zero_bias=True)
        alpha = float(rng.uniform(0.1, 1.0))
        u, i, e, e1, _, i1 = draw_sample(store, rng, joint=True, pair_negatives=True)

        def loss():
            r_exp = (fp.P[u] @ (fp.OU[e] - fp.OU[e1])
                     + fp.Q[i] @ (fp.OI[e] - fp.OI[e1]))
            r_rec = float(fp.P[u] @ (fp.Q[i] - fp.Q[i1]))
            return sp(-r_rec) + alpha * sp(-r_exp)

        arrays = {k: fp.arrays()[k] for k in ("P", "Q", "OU", "OI")}
        touched = {"P": [u], "Q": [i, i1], "OU": [e, e1], "OI": [e, e1]}
        check_step_against_fd(
            arrays, loss,
            lambda: step_pitf_j(fp, u, i, e, e1, i1, GAMMA, REG, alpha),
            GAMMA, REG, touched,
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_bper_plus(self, seed):
        store = toy_store()
        rng = np.random.default_rng(600 + seed)
        fp = random_factor_params(seed)
        emb = random_embedding(seed)
        u, i, e, e1, e2, _ = draw_sample(store, rng)

        def loss():
            def gate(ee):
                return emb.W @ emb.raw[ee].astype(float) + emb.c

            r_u = (fp.P[u] @ (fp.OU[e] * gate(e))
                   - fp.P[u] @ (fp.OU[e1] * gate(e1)) + fp.bU[e] - fp.bU[e1])
            r_i = (fp.Q[i] @ (fp.OI[e] * gate(e))
                   - fp.Q[i] @ (fp.OI[e2] * gate(e2)) + fp.bI[e] - fp.bI[e2])
            return sp(-r_u) + sp(-r_i)

        arrays = {k: v for k, v in fp.arrays().items() if k != "b_item"}
        arrays["W"] = emb.W
        arrays["c"] = emb.c
        touched = {"P": [u], "Q": [i], "OU": [e, e1], "OI": [e, e2],
                   "bU": [e, e1], "bI": [e, e2], "W": "all", "c": "all"}
        check_step_against_fd(
            arrays, loss,
            lambda: step_bper_plus(fp, emb, u, i, e, e1, e2, GAMMA, REG),
            GAMMA, REG, touched,
        )


ALL_TRAINERS = [
    ("bper", train_bper),
    ("bper-j", train_bper_j),
    ("cd", train_cd),
    ("pitf", train_pitf),
    ("cd-j", train_cd_j),
    ("pitf-j", train_pitf_j),
]


class TestTrainerContracts:
    @pytest.mark.parametrize("name,trainer", ALL_TRAINERS)
    def test_zero_learning_rate_is_noop(self, name, trainer):
        store = toy_store()
        hp = Hyperparams(d=3, gamma=0.0, reg=0.01, epochs=2, seed=4)
        report = trainer(store, hp)
        if name.startswith("cd"):
            from exprank.params import init_cd_params

            init = init_cd_params(store, hp)
        else:
            init = init_factor_params(store, hp)
        for k, arr in report.final_params.arrays().items():
            np.testing.assert_array_equal(arr, init.arrays()[k])

    def test_zero_learning_rate_bper_plus(self):
        store = toy_store()
        hp = Hyperparams(d=3, gamma=0.0, reg=0.01, epochs=2, seed=4)
        emb = random_embedding(1)
        emb.W = np.zeros_like(emb.W)
        report = train_bper_plus(store, hp, emb)
        init = init_factor_params(store, hp)
        for k, arr in report.final_params.arrays().items():
            np.testing.assert_array_equal(arr, init.arrays()[k])

    @pytest.mark.parametrize("name,trainer", ALL_TRAINERS)
    def test_bit_identical_reruns(self, name, trainer):
        store = toy_store()
        hp = Hyperparams(d=3, gamma=0.05, reg=0.01, epochs=3, seed=11, alpha=0.7)
        a = trainer(store, hp)
        b = trainer(store, hp)
        for k, arr in a.final_params.arrays().items():
            np.testing.assert_array_equal(arr, b.final_params.arrays()[k])
        assert a.epoch_losses == b.epoch_losses

    def test_bper_plus_bit_identical(self):
        store = toy_store()
        hp = Hyperparams(d=3, gamma=0.05, reg=0.01, epochs=3, seed=11)
        runs = []
        for _ in range(2):
            emb = random_embedding(7)
            runs.append(train_bper_plus(store, hp, emb))
        for k, arr in runs[0].final_params.arrays().items():
            np.testing.assert_array_equal(arr, runs[1].final_params.arrays()[k])

    def test_bper_plus_identity_gate_equals_bper(self):
        store = toy_store()
        hp = Hyperparams(d=3, gamma=0.05, reg=0.01, epochs=4, seed=2)
        emb = random_embedding(3, d_emb=5)
        emb.W = np.zeros((3, 5))
        emb.c = np.ones(3)
        plus = train_bper_plus(store, hp, emb, train_projection=False)
        plain = train_bper(store, hp)
        for k, arr in plus.final_params.arrays().items():
            np.testing.assert_array_equal(arr, plain.final_params.arrays()[k])
        np.testing.assert_array_equal(emb.W, np.zeros((3, 5)))

    def test_epoch_losses_length(self):
        store = toy_store()
        report = train_bper(store, Hyperparams(d=2, epochs=5, seed=0))
        assert len(report.epoch_losses) == 5
        assert len(report.wall_time_per_epoch) == 5

    def test_alpha_zero_decay_only_on_explanation_params(self):
        store = toy_store()
        hp = Hyperparams(d=3, gamma=0.05, reg=0.01, epochs=3, seed=6, alpha=0.0)
        report = train_bper_j(store, hp)
        assert report.notes, "alpha=0 nuance must be recorded"
        init = init_factor_params(store, hp)
        fp = report.final_params
        # biases start at zero and only ever decay
        np.testing.assert_array_equal(fp.bU, np.zeros(store.n_explanations))
        np.testing.assert_array_equal(fp.bI, np.zeros(store.n_explanations))
        # factors shrink by a per-row power of (1 - gamma * reg)
        shrink = 1.0 - hp.gamma * hp.reg
        for e in range(store.n_explanations):
            ratio = fp.OU[e] / init.OU[e]
            assert np.allclose(ratio, ratio[0], atol=1e-12)
            steps = math.log(ratio[0]) / math.log(shrink)
            assert abs(steps - round(steps)) < 1e-6
            assert 0.0 < ratio[0] <= 1.0

    def test_user_with_every_explanation_is_skipped(self):
        # user 0 holds both explanations, so no negative can be drawn
        triples = [(0, 0, 0), (0, 1, 1), (1, 0, 0), (1, 1, 1)]
        store = InteractionStore.from_triples(triples)
        hp = Hyperparams(d=2, gamma=0.05, epochs=1, seed=0)
        with pytest.warns(UserWarning, match="skipped"):
            report = train_bper(store, hp)
        assert report.skipped_samples > 0

    def test_loss_decreases_on_learnable_toy(self):
        rng = np.random.default_rng(0)
        triples = []
        for u in range(12):
            favourite = u % 4
            for i in range(4):
                triples.append((u, i, favourite))
        store = InteractionStore.from_triples(
            triples, n_users=12, n_items=4, n_explanations=8
        )
        hp = Hyperparams(d=4, gamma=0.1, reg=0.001, epochs=15, seed=1)
        report = train_bper(store, hp)
        assert report.epoch_losses[-1] < report.epoch_losses[0]
        before = holdout_bper_loss(
            init_factor_params(store, hp), store, 500, seed=9
        )
        after = holdout_bper_loss(report.final_params, store, 500, seed=9)
        assert after < before


class TestProgressLines:
    def test_epoch_lines_go_to_stderr(self, capsys):
        store = toy_store()
        train_bper(store, Hyperparams(d=2, epochs=3, gamma=0.05, seed=0),
                   log_every=1)
        err = capsys.readouterr().err
        lines = [ln for ln in err.splitlines() if ln.startswith("epoch ")]
        assert len(lines) == 3
        assert "loss" in lines[0] and "wall" in lines[0]


class TestEmbeddingBinding:
    def test_row_count_mismatch_rejected(self):
        store = toy_store()
        emb = random_embedding(0)
        emb.raw = emb.raw[:-1]
        with pytest.raises(ValueError, match="rows"):
            train_bper_plus(store, Hyperparams(d=3, epochs=1), emb)

    def test_projection_shape_mismatch_rejected(self):
        store = toy_store()
        emb = random_embedding(0)
        with pytest.raises(ValueError, match="projection shape"):
            train_bper_plus(store, Hyperparams(d=7, epochs=1), emb)


class TestSampler:
    def test_triple_uniformity_chi_square(self):
        store = toy_store()
        rng = np.random.default_rng(123)
        sampler = Sampler(store, rng)
        n = 100_000
        batch = sampler.triple_batch(n)
        counts = np.bincount(batch, minlength=store.triple_count)
        expected = n / store.triple_count
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        dof = store.triple_count - 1
        assert chi2 <= dof + 3.0 * math.sqrt(2.0 * dof)

    def test_negative_explanation_excluded_and_uniform(self):
        store = toy_store()
        rng = np.random.default_rng(321)
        sampler = Sampler(store, rng)
        u = 0
        excluded = store.expls_of_user[u]
        complement = sorted(set(range(store.n_explanations)) - excluded)
        n = 100_000
        draws = np.array([sampler.expl_not_in(excluded) for _ in range(n)])
        assert not set(draws.tolist()) & excluded
        counts = np.bincount(draws, minlength=store.n_explanations)[complement]
        expected = n / len(complement)
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        dof = len(complement) - 1
        assert chi2 <= dof + 3.0 * math.sqrt(2.0 * dof)

    def test_negative_item_excluded(self):
        store = toy_store()
        rng = np.random.default_rng(77)
        sampler = Sampler(store, rng)
        excluded = store.items_of_user[1]
        draws = {sampler.item_not_in(excluded) for _ in range(10_000)}
        assert not draws & excluded


class TestSigmoid:
    def test_complement_identity(self):
        r = np.linspace(-30.0, 30.0, 4001)
        for v in r:
            assert abs((1.0 - sigmoid(v)) - sigmoid(-v)) <= 1e-12

    def test_array_version_matches_scalar(self):
        r = np.linspace(-700.0, 700.0, 101)
        vec = sigmoid_array(r)
        for v, s in zip(r, vec):
            assert s == pytest.approx(sigmoid(float(v)), abs=1e-15)

    def test_softplus_stable(self):
        assert softplus(800.0) == 800.0
        assert softplus(-800.0) == 0.0
        assert softplus(0.0) == pytest.approx(math.log(2.0), abs=1e-15)
