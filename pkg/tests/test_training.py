import numpy as np
import pytest

from paraqnn import bench, dataio, training
from paraqnn.noise import NoiseStack
from paraqnn.training import (AdamState, LossWeights, TrainConfig, adam_step,
                              composite_loss, loss_contradiction,
                              loss_experimental, loss_noise, loss_signal,
                              physics_residual, train, train_config,
                              TrainingError)


class TestLossSignal:
    def test_perfect_fit_is_zero(self):
        v, g = loss_signal(np.array([0.3, 0.7]), np.array([0.3, 0.7]))
        assert v == 0.0 and np.all(g == 0.0)

    def test_hand_value_and_gradient(self):
        v, g = loss_signal(np.array([0.5]), np.array([0.0]))
        assert v == pytest.approx(0.25, abs=1e-15)
        assert g[0] == pytest.approx(1.0, abs=1e-15)

    def test_two_point_average(self):
        v, _ = loss_signal(np.array([0.2, 0.8]), np.array([0.0, 1.0]))
        assert v == pytest.approx(0.04, abs=1e-15)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            loss_signal(np.array([]), np.array([]))


class TestLossNoise:
    def test_matching_residual_is_zero(self):
        y = np.array([0.9, 0.1])
        t_star = np.array([0.7, 0.3])
        v, _ = loss_noise(np.abs(y - t_star), y, t_star)
        assert v == 0.0

    def test_hand_value(self):
        v, _ = loss_noise(np.array([0.0]), np.array([0.9]), np.array([0.7]))
        assert v == pytest.approx(0.04, abs=1e-15)

    def test_clean_observation_targets_zero(self):
        v, _ = loss_noise(np.array([0.1]), np.array([0.5]), np.array([0.5]))
        assert v == pytest.approx(0.01, abs=1e-15)


class TestLossContradiction:
    def test_inactive_below_hinge(self):
        v, gt, gf = loss_contradiction(np.array([0.4, 0.1]), np.array([0.5, 0.2]))
        assert v == 0.0
        assert np.all(gt == 0.0) and np.all(gf == 0.0)

    def test_hand_value(self):
        v, gt, gf = loss_contradiction(np.array([0.8]), np.array([0.5]))
        assert v == pytest.approx(0.09, abs=1e-12)
        assert gt[0] == pytest.approx(0.6, abs=1e-12)
        assert np.array_equal(gt, gf)

    def test_boundary_is_inactive(self):
        v, _, _ = loss_contradiction(np.array([0.5]), np.array([0.5]))
        assert v == 0.0


class TestLossExperimental:
    def test_perfect_self_consistent_fit(self):
        y = np.array([0.3, 0.6])
        v, _, _ = loss_experimental(y.copy(), np.zeros(2), y, LossWeights())
        assert v == 0.0

    def test_hand_value(self):
        v, _, _ = loss_experimental(np.array([0.5]), np.array([0.2]),
                                    np.array([0.7]), LossWeights())
        assert v == pytest.approx(0.04, abs=1e-15)

    def test_stop_gradient_into_truth_channel(self):
        # fit term vanishes (t_hat == y) and no contradiction: even though
        # f_hat misses the residual target, d/d t_hat must be exactly zero
        y = np.array([0.4])
        v, d_t, d_f = loss_experimental(y.copy(), np.array([0.3]), y,
                                        LossWeights())
        assert v > 0.0
        assert d_t[0] == 0.0
        assert d_f[0] != 0.0


class TestComposite:
    def test_total_is_exact_weighted_sum(self):
        rng = np.random.default_rng(0)
        t_hat, f_hat, y, t_star = (rng.random(37) for _ in range(4))
        w = LossWeights(lambda_s=1.0, lambda_n=0.8, lambda_c=0.5)
        total, _, _, parts = composite_loss(t_hat, f_hat, y, t_star, w,
                                            "benchmark")
        ls, _ = loss_signal(t_hat, t_star)
        ln, _ = loss_noise(f_hat, y, t_star)
        lc, _, _ = loss_contradiction(t_hat, f_hat)
        assert total == w.lambda_s * ls + w.lambda_n * ln + w.lambda_c * lc
        assert parts["signal"] == ls

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            composite_loss(np.ones(1), np.ones(1), np.ones(1), np.ones(1),
                           LossWeights(), "other")

    def test_preset_weights(self):
        assert training.loss_weights_for("rabi") == LossWeights(1.0, 0.5, 0.5)
        assert training.loss_weights_for("mixed") == LossWeights(1.0, 0.8, 0.5)


class TestPhysicsResidual:
    def test_exponential_decay_matches_surrogate(self):
        t = np.linspace(0.0, 5.0, 2000)
        loss = training.pinn_residual(np.exp(-0.2 * t), t, "incomplete",
                                      gamma=0.2)
        assert loss < 1e-4

    def test_equilibrium_constant_is_exact(self):
        t = np.linspace(0.0, 5.0, 200)
        loss = training.pinn_residual(np.full(200, 0.37), t, "known",
                                      zeta=0.3, omega=1.5, p_eq=0.37)
        assert loss == 0.0

    def test_harmonic_solution(self):
        t = np.arange(0.0, 5.0 + 1e-9, 1e-3)
        loss = training.pinn_residual(np.cos(2.0 * t), t, "known",
                                      zeta=0.0, omega=2.0, p_eq=0.0)
        assert loss < 1e-3

    def test_needs_three_points(self):
        with pytest.raises(ValueError, match="3 grid points"):
            physics_residual(np.ones(2), np.array([0.0, 1.0]), "incomplete",
                             gamma=0.1)

    def test_nonuniform_grid_rejected(self):
        with pytest.raises(ValueError, match="uniform"):
            physics_residual(np.ones(4), np.array([0.0, 1.0, 2.0, 4.0]),
                             "incomplete", gamma=0.1)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        t = np.linspace(0.0, 3.0, 40)
        p = rng.random(40)
        for kind, params in (("incomplete", {"gamma": 0.3}),
                             ("known", {"zeta": 0.2, "omega": 1.2, "p_eq": 0.4})):
            _, dp, dpar = physics_residual(p, t, kind, **params)
            h = 1e-7
            for i in rng.choice(40, 8, replace=False):
                pp, pm = p.copy(), p.copy()
                pp[i] += h
                pm[i] -= h
                fd = (physics_residual(pp, t, kind, **params)[0]
                      - physics_residual(pm, t, kind, **params)[0]) / (2 * h)
                assert fd == pytest.approx(dp[i], rel=1e-5, abs=1e-9)
            for name in params:
                up = dict(params)
                dn = dict(params)
                up[name] += h
                dn[name] -= h
                fd = (physics_residual(p, t, kind, **up)[0]
                      - physics_residual(p, t, kind, **dn)[0]) / (2 * h)
                assert fd == pytest.approx(dpar[name], rel=1e-5, abs=1e-9)


class TestAdam:
    def test_zero_gradient_is_identity(self):
        theta = np.array([1.0, -2.0, 3.0])
        state = AdamState.for_arrays([theta])
        cfg = TrainConfig(epochs=1, batch_size=1, model_seed=0)
        adam_step([theta], [np.zeros(3)], state, cfg)
        assert np.array_equal(theta, [1.0, -2.0, 3.0])

    def test_first_step_magnitude(self):
        theta = np.array(0.0)
        state = AdamState.for_arrays([theta])
        cfg = TrainConfig(epochs=1, batch_size=1, model_seed=0)
        adam_step([theta], [np.asarray(1.0)], state, cfg)
        # bias-corrected m_hat = v_hat = 1 -> step = -lr/(1+eps)
        assert float(theta) == pytest.approx(-1e-3, rel=1e-6)

    def test_constant_gradient_near_invariant_steps(self):
        theta = np.array(0.0)
        state = AdamState.for_arrays([theta])
        cfg = TrainConfig(epochs=1, batch_size=1, model_seed=0)
        adam_step([theta], [np.asarray(1.0)], state, cfg)
        d1 = abs(float(theta))
        prev = float(theta)
        adam_step([theta], [np.asarray(1.0)], state, cfg)
        d2 = abs(float(theta) - prev)
        assert d2 == pytest.approx(d1, abs=1e-6)

    def test_non_finite_gradient_aborts(self):
        theta = np.array([1.0])
        state = AdamState.for_arrays([theta])
        cfg = TrainConfig(epochs=1, batch_size=1, model_seed=0)
        with pytest.raises(TrainingError, match="non-finite gradient"):
            adam_step([theta], [np.array([np.nan])], state, cfg)


class TestTrainConfigPresets:
    @pytest.mark.parametrize("regime,epochs,batch", [
        ("rabi", 1500, 256), ("lindblad", 2000, 256), ("mixed", 4000, 512),
    ])
    def test_preset_table(self, regime, epochs, batch):
        cfg = train_config(regime, model_seed=42)
        assert cfg.epochs == epochs
        assert cfg.batch_size == batch
        assert cfg.learning_rate == 1e-3
        assert (cfg.beta1, cfg.beta2, cfg.eps) == (0.9, 0.999, 1e-8)

    def test_scale_divides_epochs(self):
        assert train_config("rabi", 42, scale=0.25).epochs == 375


def _slow_oscillation_dataset(n=2000, noise=NoiseStack()):
    """Zero/low-noise dataset with a slow oscillation; learnable fast."""
    from dataclasses import replace as _replace
    cfg = dataio.regime_config("lindblad", scale=n / 25_000)
    return dataio.build_dataset(_replace(cfg, noise=noise))


class TestTrainLoop:
    def test_clean_signal_is_learnable(self):
        # smoke oracle: a clean slow oscillation reaches tiny error quickly
        ds = _slow_oscillation_dataset()
        cfg = TrainConfig(epochs=200, batch_size=256, model_seed=43,
                          hidden_width=32, dtype="float64")
        model = bench.build_model("paraqnn", cfg)
        model, tel = train(model, ds, LossWeights(), cfg)
        assert tel.test_mse_clean < 1e-3

    def test_bit_identical_reruns(self):
        ds = _slow_oscillation_dataset(n=600)
        cfg = TrainConfig(epochs=8, batch_size=128, model_seed=42,
                          hidden_width=16)
        tels = []
        for _ in range(2):
            model = bench.build_model("paraqnn", cfg)
            model, tel = train(model, ds, LossWeights(), cfg)
            tels.append(tel)
        a, b = tels
        assert np.array_equal(a.train_loss, b.train_loss)
        assert np.array_equal(a.val_loss, b.val_loss)
        assert np.array_equal(a.alpha, b.alpha)
        assert a.test_mse_clean == b.test_mse_clean

    def test_alpha_series_starts_at_six(self):
        ds = _slow_oscillation_dataset(n=400)
        cfg = TrainConfig(epochs=3, batch_size=128, model_seed=7,
                          hidden_width=8)
        model = bench.build_model("paraqnn", cfg)
        _, tel = train(model, ds, LossWeights(), cfg)
        assert tel.alpha[0] == 6.0
        assert np.all(np.isfinite(tel.train_loss))
        assert np.all(np.isfinite(tel.alpha))

    def test_experimental_mode_runs(self):
        ds = _slow_oscillation_dataset(n=400)
        cfg = TrainConfig(epochs=3, batch_size=128, model_seed=7,
                          hidden_width=8)
        model = bench.build_model("paraqnn", cfg)
        _, tel = train(model, ds, LossWeights(), cfg, mode="experimental")
        assert np.all(np.isfinite(tel.train_loss))

    def test_non_finite_loss_aborts_with_epoch(self):
        ds = _slow_oscillation_dataset(n=400)
        cfg = TrainConfig(epochs=2, batch_size=128, model_seed=1)

        class PoisonModel:
            def attach_dataset(self, tau, span):
                pass

            def arrays(self):
                return [np.zeros(1)]

            def loss_and_grads(self, tau, y, t_star, weights, mode):
                return float("nan"), [np.zeros(1)]

        with pytest.raises(TrainingError, match="epoch 0"):
            train(PoisonModel(), ds, LossWeights(), cfg)

    def test_telemetry_round_trip(self, tmp_path):
        ds = _slow_oscillation_dataset(n=400)
        cfg = TrainConfig(epochs=4, batch_size=128, model_seed=7,
                          hidden_width=8)
        model = bench.build_model("paraqnn", cfg)
        _, tel = train(model, ds, LossWeights(), cfg)
        path = tmp_path / "telemetry.csv"
        training.save_telemetry(tel, path)
        table = training.load_telemetry_table(path)
        assert np.array_equal(table["train_loss"], tel.train_loss)
        assert np.array_equal(table["alpha"], tel.alpha)

    @pytest.mark.slow
    def test_training_loss_trends_down_on_presets(self):
        for regime in ("rabi", "lindblad", "mixed"):
            ds = dataio.build_dataset(dataio.regime_config(regime, scale=0.02))
            cfg = train_config(regime, model_seed=42, scale=0.02,
                               dtype="float32")
            model = bench.build_model("paraqnn", cfg)
            _, tel = train(model, ds, training.loss_weights_for(regime), cfg)
            k = max(1, tel.epochs // 10)
            assert np.median(tel.train_loss[-k:]) < np.median(tel.train_loss[:k])
