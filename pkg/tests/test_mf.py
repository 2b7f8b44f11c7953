import numpy as np
import pytest

from recbench.baselines import DefaultPredictor
from recbench.dataset import RatingLog, build_segment_model
from recbench.mf import (
    ITEM_PINNED,
    USER_PINNED,
    FactorModel,
    MFPredictor,
    TrainingError,
    mf_item_similarity,
    sgd_epoch,
    train_mf,
)
from recbench.synthetic import gen_planted_rank1, gen_uniform


def small_model(p, q, user_ids=None, item_ids=None):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return FactorModel(
        n_factors=p.shape[1],
        learning_rate=0.03,
        regularization=0.008,
        seed=0,
        user_ids=user_ids or [f"u{k}" for k in range(p.shape[0])],
        item_ids=item_ids or [f"i{k}" for k in range(q.shape[0])],
        user_factors=p,
        item_factors=q,
    )


class TestPrediction:
    def test_zero_free_parameters_dot_is_zero(self):
        # Pinned slots only: p = (1, 0, 0), q = (0, 1, 0) -> dot product 0.
        model = small_model([[1, 0, 0]], [[0, 1, 0]])
        assert model.raw_predict("u0", "i0") == 0.0

    def test_dot_product_example(self):
        model = small_model([[1, 0.5, 0.2]], [[1.5, 1, 1.0]])
        assert model.raw_predict("u0", "i0") == pytest.approx(2.2)

    def test_clamped(self):
        model = small_model([[1, 0, 2.0]], [[1.5, 1, 2.4]])
        stats = build_segment_model([RatingLog("u0", "i0", 3.0)])
        pred = MFPredictor(model, stats)
        assert model.raw_predict("u0", "i0") > 5.0
        assert pred.predict("u0", "i0") == 5.0

    def test_unknown_user_falls_back(self):
        model = small_model([[1, 0, 0]], [[0, 1, 0]])
        stats = build_segment_model([RatingLog("u0", "i0", 4.0)])
        pred = MFPredictor(model, stats)
        assert pred.predict("ghost", "i0") == DefaultPredictor(stats).predict("ghost", "i0")

    def test_predict_many_matches_predict(self):
        logs = gen_uniform(20, 12, 0.5, seed=1)
        model = train_mf(logs, n_factors=4, seed=2, budget_seconds=2, validation_fraction=0.1)
        stats = build_segment_model(logs)
        pred = MFPredictor(model, stats)
        catalog = tuple(sorted({l.item_id for l in logs}) + ["unknown"])
        for user in ["u00000", "u00004", "ghost"]:
            many = pred.predict_many(user, catalog)
            single = [pred.predict(user, i) for i in catalog]
            assert np.allclose(many, single, atol=1e-12)


class TestSgdUpdates:
    def test_update_matches_finite_difference_gradient(self):
        # One SGD step direction equals the negative gradient of
        # 0.5*(r - p.q)^2 + 0.5*reg*(|p_free|^2 + |q_free|^2) on the free slots.
        rng = np.random.default_rng(0)
        for _ in range(20):
            f = int(rng.integers(3, 7))
            p = rng.normal(0, 0.5, (1, f))
            q = rng.normal(0, 0.5, (1, f))
            p[0, USER_PINNED] = 1.0
            q[0, ITEM_PINNED] = 1.0
            r = float(rng.uniform(1, 5))
            lr, reg = 1e-4, 0.3

            def loss(pv, qv):
                err = r - pv @ qv
                free_p = np.delete(pv, USER_PINNED)
                free_q = np.delete(qv, ITEM_PINNED)
                return 0.5 * err**2 + 0.5 * reg * (free_p @ free_p + free_q @ free_q)

            grad_p = np.zeros(f)
            grad_q = np.zeros(f)
            eps = 1e-6
            for k in range(f):
                dp = np.zeros(f)
                dp[k] = eps
                grad_p[k] = (loss(p[0] + dp, q[0]) - loss(p[0] - dp, q[0])) / (2 * eps)
                grad_q[k] = (loss(p[0], q[0] + dp) - loss(p[0], q[0] - dp)) / (2 * eps)

            p2, q2 = p.copy(), q.copy()
            sgd_epoch(p2, q2, np.array([0]), np.array([0]), np.array([r]), np.array([0]), lr, reg)
            step_p = (p2[0] - p[0]) / lr
            step_q = (q2[0] - q[0]) / lr
            mask_p = np.arange(f) != USER_PINNED
            mask_q = np.arange(f) != ITEM_PINNED
            assert np.allclose(step_p[mask_p], -grad_p[mask_p], rtol=1e-4, atol=1e-8)
            assert np.allclose(step_q[mask_q], -grad_q[mask_q], rtol=1e-4, atol=1e-8)
            assert step_p[USER_PINNED] == 0.0
            assert step_q[ITEM_PINNED] == 0.0

    def test_single_step_reduces_error(self):
        # With reg 0 and a small learning rate, one step on a single log
        # strictly reduces that log's squared error.
        rng = np.random.default_rng(1)
        for _ in range(100):
            f = int(rng.integers(3, 8))
            p = rng.normal(0, 0.5, (1, f))
            q = rng.normal(0, 0.5, (1, f))
            p[0, USER_PINNED] = 1.0
            q[0, ITEM_PINNED] = 1.0
            r = float(rng.uniform(1, 5))
            before = (r - p[0] @ q[0]) ** 2
            if before < 1e-20:
                continue
            sgd_epoch(p, q, np.array([0]), np.array([0]), np.array([r]), np.array([0]), 1e-3, 0.0)
            after = (r - p[0] @ q[0]) ** 2
            assert after < before


class TestTraining:
    def test_pinned_coordinates_unchanged(self):
        logs = gen_uniform(30, 15, 0.5, seed=3)
        model = train_mf(logs, n_factors=5, seed=4, budget_seconds=2, validation_fraction=0.1)
        assert np.all(model.user_factors[:, USER_PINNED] == 1.0)
        assert np.all(model.item_factors[:, ITEM_PINNED] == 1.0)

    def test_bit_reproducible(self):
        logs = gen_uniform(25, 12, 0.5, seed=5)
        kwargs = dict(n_factors=4, seed=9, budget_seconds=1e9, validation_fraction=0.1, max_epochs=8)
        a = train_mf(logs, **kwargs)
        b = train_mf(logs, **kwargs)
        assert np.array_equal(a.user_factors, b.user_factors)
        assert np.array_equal(a.item_factors, b.item_factors)
        # elapsed is wall clock; epochs and validation RMSEs must match exactly
        assert [(e["epoch"], e["val_rmse"]) for e in a.training_log] == [
            (e["epoch"], e["val_rmse"]) for e in b.training_log
        ]

    def test_returns_best_validation_snapshot(self):
        logs = gen_uniform(40, 20, 0.5, seed=6)
        model = train_mf(logs, n_factors=4, seed=7, budget_seconds=1e9, validation_fraction=0.1, max_epochs=30)
        best_epoch = min(model.training_log, key=lambda e: e["val_rmse"])
        # Retrain stopping exactly at the best epoch and compare factor tables.
        again = train_mf(
            logs, n_factors=4, seed=7, budget_seconds=1e9, validation_fraction=0.1,
            max_epochs=best_epoch["epoch"] + 1,
        )
        assert np.array_equal(model.user_factors, again.user_factors)
        assert np.array_equal(model.item_factors, again.item_factors)

    def test_training_log_has_every_epoch(self):
        logs = gen_uniform(25, 12, 0.5, seed=8)
        model = train_mf(logs, n_factors=4, seed=1, budget_seconds=1e9, validation_fraction=0.1, max_epochs=6)
        assert [e["epoch"] for e in model.training_log] == list(range(len(model.training_log)))

    def test_planted_rank1_recovery(self):
        logs = gen_planted_rank1(100, 60, 0.5, seed=11)
        model = train_mf(logs, n_factors=4, seed=12, budget_seconds=20, validation_fraction=0.05)
        stats = build_segment_model(logs)
        pred = MFPredictor(model, stats)
        errors = [(l.rating - pred.predict(l.user_id, l.item_id)) ** 2 for l in logs]
        assert np.sqrt(np.mean(errors)) <= 0.32

    def test_invalid_inputs(self):
        logs = gen_uniform(10, 5, 0.5, seed=0)
        with pytest.raises(TrainingError):
            train_mf([], n_factors=4, seed=0, budget_seconds=1)
        with pytest.raises(TrainingError):
            train_mf(logs, n_factors=2, seed=0, budget_seconds=1)
        with pytest.raises(TrainingError):
            train_mf(logs, n_factors=4, seed=0, budget_seconds=1, validation_fraction=0.7)
        with pytest.raises(TrainingError):
            train_mf(logs, n_factors=4, seed=0, budget_seconds=0)


class TestItemSimilarity:
    def test_identical_vectors_full_similarity(self):
        q = [[0.5, 1, 0.2, 0.9], [0.5, 1, 0.2, 0.9], [1.0, 1, -2.0, 0.3]]
        model = small_model(np.ones((1, 4)), q)
        matrix = mf_item_similarity(model, k=2)
        assert matrix.neighbor_list("i0")[0] == ("i1", pytest.approx(1.0))

    def test_mirror_vector_excluded(self):
        qi = np.array([0.5, 1.0, 0.2, 0.9])
        qj = -qi + 2 * qi.mean()
        # Pearson of a vector with its mirror about the mean is exactly -1.
        model = small_model(np.ones((1, 4)), [qi, qj])
        matrix = mf_item_similarity(model, k=2)
        assert all(n != "i1" for n, _ in matrix.neighbor_list("i0"))

    def test_zero_variance_vector_has_no_neighbors(self):
        q = [[0.7, 0.7, 0.7, 0.7], [0.5, 1, 0.2, 0.9], [0.6, 1, 0.1, 0.8]]
        model = small_model(np.ones((1, 4)), q)
        matrix = mf_item_similarity(model, k=2)
        assert matrix.neighbor_list("i0") == []
        assert all(n != "i0" for n, _ in matrix.neighbor_list("i1"))

    def test_matches_naive_pearson(self):
        rng = np.random.default_rng(3)
        q = rng.normal(0, 1, (8, 5))
        model = small_model(np.ones((1, 5)), q)
        matrix = mf_item_similarity(model, k=7)
        for a in range(8):
            for b in range(8):
                if a == b:
                    continue
                expected = np.corrcoef(q[a], q[b])[0, 1]
                got = dict(matrix.neighbor_list(f"i{a}")).get(f"i{b}")
                if expected > 1e-9:
                    assert got == pytest.approx(expected, abs=1e-10)
                else:
                    assert got is None

    def test_exclude_pinned_option(self):
        rng = np.random.default_rng(4)
        q = rng.normal(0, 1, (6, 5))
        q[:, ITEM_PINNED] = 1.0
        model = small_model(np.ones((1, 5)), q)
        matrix = mf_item_similarity(model, k=5, include_pinned=False)
        reduced = np.delete(q, ITEM_PINNED, axis=1)
        for a in range(6):
            for n, w in matrix.neighbor_list(f"i{a}"):
                b = int(n[1:])
                assert w == pytest.approx(np.corrcoef(reduced[a], reduced[b])[0, 1], abs=1e-10)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        logs = gen_uniform(20, 10, 0.5, seed=13)
        model = train_mf(logs, n_factors=4, seed=3, budget_seconds=2, validation_fraction=0.1, max_epochs=3)
        path = tmp_path / "model.npz"
        model.save(path)
        loaded = FactorModel.load(path)
        assert loaded.user_ids == model.user_ids
        assert loaded.item_ids == model.item_ids
        assert np.array_equal(loaded.user_factors, model.user_factors)
        assert np.array_equal(loaded.item_factors, model.item_factors)
        assert loaded.training_log == model.training_log
        assert loaded.n_factors == model.n_factors
