"""Tests for fairweight.classifier: weighted training, gradients, Hessian and persistence."""

from dataclasses import replace

import numpy as np
import pytest

from fairweight import classifier
from fairweight.classifier import (
    bce,
    extract_features,
    group_loss,
    head_proba,
    hessian,
    load_model,
    per_sample_gradient,
    per_sample_gradients,
    predict_proba,
    refit_head,
    save_model,
    train,
    train_weighted,
    weighted_gradient,
    weighted_objective,
)
from fairweight.errors import AllZeroWeights, ConfigError, DimensionMismatch, HeadNotConverged
from fairweight.models import EncodedDataset, ModelKind, ModelParams, TrainConfig
from fairweight.synthetic import generate_synthetic


@pytest.fixture
def ds():
    return generate_synthetic(beta=0.3, n=120, d=3, seed=11)


@pytest.fixture
def cfg():
    return TrainConfig(epochs=100, l2_strength=1e-3, tolerance=1e-10)


def with_theta(m: ModelParams, theta: np.ndarray) -> ModelParams:
    return replace(m, head_w=theta[:-1].copy(), head_b=float(theta[-1]))


class TestBce:
    def test_clamped_at_extremes(self):
        losses = bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert np.all(np.isfinite(losses))
        assert losses[0] == pytest.approx(-np.log(1e-12))


class TestTrainWeighted:
    def test_logistic_reaches_stationary_point(self, ds, cfg):
        m = train(ds, cfg)
        assert np.linalg.norm(weighted_gradient(m, ds, np.ones(ds.n))) <= 1e-8

    def test_scaling_weights_is_bit_identical(self, ds, cfg):
        w = np.random.default_rng(0).uniform(0.1, 2.0, ds.n)
        m1 = train_weighted(ds, w, cfg)
        m2 = train_weighted(ds, 4.0 * w, cfg)
        np.testing.assert_array_equal(m1.theta, m2.theta)

    def test_zero_weight_equals_removal(self, ds, cfg):
        w = np.ones(ds.n)
        w[:10] = 0.0
        m_zero = train_weighted(ds, w, cfg)
        m_drop = train(ds.subset(np.arange(10, ds.n)), cfg)
        np.testing.assert_allclose(m_zero.theta, m_drop.theta, atol=1e-8)

    def test_all_zero_weights(self, ds, cfg):
        with pytest.raises(AllZeroWeights):
            train_weighted(ds, np.zeros(ds.n), cfg)

    def test_negative_weight_rejected(self, ds, cfg):
        w = np.ones(ds.n)
        w[0] = -1.0
        with pytest.raises(ConfigError):
            train_weighted(ds, w, cfg)

    def test_wrong_weight_length(self, ds, cfg):
        with pytest.raises(ConfigError):
            train_weighted(ds, np.ones(ds.n + 1), cfg)

    def test_gd_solver_approaches_newton(self, ds):
        newton = train(ds, TrainConfig(l2_strength=1e-2))
        gd = train(ds, TrainConfig(l2_strength=1e-2, solver="gd", epochs=3000, learning_rate=1.0, tolerance=1e-7))
        np.testing.assert_allclose(gd.theta, newton.theta, atol=1e-4)

    def test_deterministic(self, ds, cfg):
        np.testing.assert_array_equal(train(ds, cfg).theta, train(ds, cfg).theta)

    def test_newton_runs_past_loose_tolerance(self, ds):
        m = train(ds, TrainConfig(l2_strength=1e-3, tolerance=1e-4))
        assert np.linalg.norm(weighted_gradient(m, ds, np.ones(ds.n))) <= 1e-10

    def test_newton_cap_raises(self, ds, monkeypatch):
        monkeypatch.setattr(classifier, "NEWTON_MAX_ITER", 1)
        with pytest.raises(HeadNotConverged) as info:
            train(ds, TrainConfig(l2_strength=1e-3, tolerance=1e-10))
        assert info.value.stage == "train"
        assert info.value.gnorm > 1e-10

    def test_gd_short_run_only_warns(self, ds, caplog):
        m = train(ds, TrainConfig(solver="gd", epochs=2, learning_rate=0.1, tolerance=1e-10))
        assert np.all(np.isfinite(m.theta))
        assert "Head fit stopped" in caplog.text

    def test_warm_start_reaches_same_optimum(self, ds, cfg):
        full = train(ds, cfg)
        w = np.ones(ds.n)
        w[5] = 0.0
        cold = train_weighted(ds, w, cfg)
        warm = train_weighted(ds, w, cfg, init=full)
        np.testing.assert_allclose(warm.theta, cold.theta, atol=1e-9)

    def test_warm_start_needs_matching_logistic(self, ds, cfg):
        other = ModelParams(kind=ModelKind.LOGISTIC, head_w=np.zeros(ds.d + 1), head_b=0.0, input_dim=ds.d + 1)
        with pytest.raises(ConfigError):
            train_weighted(ds, np.ones(ds.n), cfg, init=other)


class TestMlp:
    @pytest.fixture
    def mlp_cfg(self):
        return TrainConfig(epochs=20, learning_rate=0.05, batch_size=32, hidden_sizes=(8, 4), l2_strength=1e-3)

    def test_head_refit_is_stationary(self, ds, mlp_cfg):
        m = train(ds, mlp_cfg, ModelKind.MLP)
        assert m.kind == ModelKind.MLP
        assert m.head_dim == 4
        assert np.linalg.norm(weighted_gradient(m, ds, np.ones(ds.n))) <= 1e-6

    def test_same_seed_same_model(self, ds, mlp_cfg):
        m1 = train(ds, mlp_cfg, ModelKind.MLP)
        m2 = train(ds, mlp_cfg, ModelKind.MLP)
        np.testing.assert_array_equal(m1.theta, m2.theta)

    def test_predictions_are_probabilities(self, ds, mlp_cfg):
        probs = predict_proba(train(ds, mlp_cfg, ModelKind.MLP), ds.X).probs
        assert np.all((probs >= 0) & (probs <= 1))

    def test_prediction_factors_through_head(self, ds, mlp_cfg):
        m = train(ds, mlp_cfg, ModelKind.MLP)
        np.testing.assert_array_equal(predict_proba(m, ds.X).probs, head_proba(m, extract_features(m, ds.X)))

    def test_refit_head_keeps_body(self, ds, mlp_cfg):
        m = train(ds, mlp_cfg, ModelKind.MLP)
        w = np.ones(ds.n)
        w[:3] = 0.0
        refit = refit_head(m, ds, w, mlp_cfg)
        for (W, b), (W_new, b_new) in zip(m.hidden, refit.hidden):
            np.testing.assert_array_equal(W, W_new)
            np.testing.assert_array_equal(b, b_new)
        assert np.linalg.norm(weighted_gradient(refit, ds, w)) <= 1e-10
        assert not np.allclose(refit.theta, m.theta)


class TestPredict:
    def test_half_maps_to_positive(self):
        m = ModelParams(kind=ModelKind.LOGISTIC, head_w=np.zeros(2), head_b=0.0, input_dim=2)
        batch = predict_proba(m, np.zeros((3, 2)))
        np.testing.assert_array_equal(batch.probs, [0.5, 0.5, 0.5])
        np.testing.assert_array_equal(batch.labels, [1, 1, 1])

    def test_dimension_mismatch(self):
        m = ModelParams(kind=ModelKind.LOGISTIC, head_w=np.zeros(2), head_b=0.0, input_dim=2)
        with pytest.raises(DimensionMismatch):
            predict_proba(m, np.zeros((3, 5)))


class TestGradients:
    def test_gradient_matches_finite_differences(self, ds, cfg):
        m = train(ds, cfg)
        rng = np.random.default_rng(1)
        m = with_theta(m, m.theta + rng.normal(0, 0.3, m.theta.shape))
        w = rng.uniform(0.5, 1.5, ds.n)
        g = weighted_gradient(m, ds, w)
        eps = 1e-6
        for j in range(len(m.theta)):
            step = np.zeros_like(m.theta)
            step[j] = eps
            up = weighted_objective(with_theta(m, m.theta + step), ds, w)
            down = weighted_objective(with_theta(m, m.theta - step), ds, w)
            assert (up - down) / (2 * eps) == pytest.approx(g[j], abs=1e-6)

    def test_per_sample_gradients_average_to_full_gradient(self, ds, cfg):
        m = train(ds, cfg)
        G = per_sample_gradients(m, ds.X, ds.y)
        full = G.mean(axis=0) + 2 * m.l2_strength * m.theta
        np.testing.assert_allclose(full, weighted_gradient(m, ds, np.ones(ds.n)), atol=1e-12)

    def test_single_sample_gradient(self, ds, cfg):
        m = train(ds, cfg)
        np.testing.assert_allclose(per_sample_gradient(m, ds.sample(5)), per_sample_gradients(m, ds.X, ds.y)[5])

    def test_hessian_matches_gradient_jacobian(self, ds, cfg):
        m = train(ds, cfg)
        H = hessian(m, ds, damping=0.0).matrix
        eps = 1e-6
        ones = np.ones(ds.n)
        for j in range(len(m.theta)):
            step = np.zeros_like(m.theta)
            step[j] = eps
            col = (
                weighted_gradient(with_theta(m, m.theta + step), ds, ones)
                - weighted_gradient(with_theta(m, m.theta - step), ds, ones)
            ) / (2 * eps)
            np.testing.assert_allclose(H[:, j], col, atol=1e-6)

    def test_hessian_is_symmetric_positive_definite(self, ds, cfg):
        H = hessian(train(ds, cfg), ds, damping=1e-3)
        np.testing.assert_array_equal(H.matrix, H.matrix.T)
        assert np.min(np.linalg.eigvalsh(H.matrix)) > 0
        assert H.k == ds.d + 1

    def test_empty_dataset_hessian_is_damping(self, ds, cfg):
        m = train(ds, cfg)
        empty = ds.subset(np.array([], dtype=int))
        H = hessian(m, empty, damping=0.5).matrix
        np.testing.assert_allclose(H, (2 * m.l2_strength + 0.5) * np.eye(ds.d + 1))

    def test_negative_damping(self, ds, cfg):
        with pytest.raises(ConfigError):
            hessian(train(ds, cfg), ds, damping=-1.0)

    def test_group_loss_sums(self, ds, cfg):
        m = train(ds, cfg)
        idx0 = np.flatnonzero(ds.a == 0)
        idx1 = np.flatnonzero(ds.a == 1)
        total = group_loss(m, ds, np.arange(ds.n))
        assert group_loss(m, ds, idx0) + group_loss(m, ds, idx1) == pytest.approx(total)
        assert group_loss(m, ds, np.array([], dtype=int)) == 0.0


class TestPersistence:
    def test_logistic_round_trip(self, tmp_path, ds, cfg):
        m = train(ds, cfg)
        path = tmp_path / "model.json"
        save_model(path, m)
        loaded = load_model(path)
        np.testing.assert_allclose(predict_proba(loaded, ds.X).probs, predict_proba(m, ds.X).probs, atol=1e-12)

    def test_mlp_round_trip(self, tmp_path, ds):
        m = train(ds, TrainConfig(epochs=3, hidden_sizes=(5, 3), batch_size=16), ModelKind.MLP)
        path = tmp_path / "mlp.json"
        save_model(path, m)
        loaded = load_model(path)
        assert loaded.kind == ModelKind.MLP
        np.testing.assert_allclose(predict_proba(loaded, ds.X).probs, predict_proba(m, ds.X).probs, atol=1e-12)

    def test_tiny_dataset(self):
        ds = EncodedDataset(X=[[0.0], [1.0], [2.0], [3.0]], y=[0, 0, 1, 1], a=[0, 1, 0, 1], feature_names=["x"])
        m = train(ds, TrainConfig(l2_strength=1e-2))
        assert m.head_w[0] > 0
