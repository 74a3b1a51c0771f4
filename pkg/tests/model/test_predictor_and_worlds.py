"""
Tests for the latent predictor, its training loop and the predictor-backed world.
"""

import numpy as np
import pytest

from src.model.codec import encode, latent_shape
from src.model.objectives import LossWeights
from src.model.predictor import (
    action_features, build_predictor, fuse_parameters, load_params, parameter_count, predictor_forward,
    save_params,
)
from src.model.training import LOG_COLUMNS, TrainConfig, read_loss_log, train
from src.model.worlds import LearnedWorld, SamplerConfig, StaticWorld, ddim_sample
from src.services.tasks import get_task
from src.utils.errors import ConfigError, ShapeError


def _small_model(**kwargs):
    options = dict(blocks=1, hidden=8, video_length=9)
    options.update(kwargs)
    return build_predictor(seed=0, **options)


def _latents(rng, frames: int = 3):
    z_init = rng.standard_normal((1, 2, 2, 16))
    z_noisy = rng.standard_normal((frames, 2, 2, 16))
    condition = rng.standard_normal((frames, 2, 2, 16))
    return z_init, z_noisy, condition


class TestLatentPredictor:
    """Tests for the conditioned velocity predictor."""

    def test_fresh_model_ignores_condition(self, rng):
        """Zero-initialised fusion layers leave the base output untouched."""
        model = _small_model()
        z_init, z_noisy, condition = _latents(rng)
        a = predictor_forward(model, z_init, condition, z_noisy, 0.5)
        b = predictor_forward(model, z_init, 2.0 * condition + 1.0, z_noisy, 0.5)
        assert a.shape == z_noisy.shape
        np.testing.assert_array_equal(a, b)
        assert all(float(p.abs().sum()) == 0.0 for p in fuse_parameters(model))

    def test_unconditioned_model_has_no_control_branch(self):
        """The 'none' variant carries no control parameters."""
        plain = _small_model(conditioning="none")
        masked = _small_model()
        assert fuse_parameters(plain) == []
        assert parameter_count(plain) < parameter_count(masked)

    def test_condition_shape_checked(self, rng):
        """A missing or mis-shaped condition raises ShapeError."""
        model = _small_model()
        z_init, z_noisy, condition = _latents(rng)
        with pytest.raises(ShapeError):
            predictor_forward(model, z_init, None, z_noisy, 0.5)
        with pytest.raises(ShapeError):
            predictor_forward(model, z_init, condition[:2], z_noisy, 0.5)

    def test_unknown_conditioning(self):
        """Conditioning must be mask, coords or none."""
        with pytest.raises(ConfigError):
            _small_model(conditioning="depth")

    def test_seeded_initialisation(self, rng):
        """Equal seeds build equal predictors."""
        z_init, z_noisy, condition = _latents(rng)
        a = predictor_forward(_small_model(), z_init, condition, z_noisy, 0.3)
        b = predictor_forward(_small_model(), z_init, condition, z_noisy, 0.3)
        np.testing.assert_array_equal(a, b)

    def test_parameter_file(self, tmp_path, rng):
        """Saved parameters rebuild the architecture and its outputs."""
        model = _small_model(conditioning="coords")
        save_params(tmp_path / "model.bin", model)
        again = load_params(tmp_path / "model.bin")
        assert (again.conditioning, again.hidden, again.video_length) == ("coords", 8, 9)
        z_init, z_noisy, _ = _latents(rng)
        features = rng.standard_normal((3, 28))
        np.testing.assert_allclose(
            predictor_forward(again, z_init, features, z_noisy, 0.5),
            predictor_forward(model, z_init, features, z_noisy, 0.5),
            rtol=1e-5,
            atol=1e-5,
        )

    def test_missing_parameter_file(self, tmp_path):
        """Reading a missing file raises RuntimeError."""
        with pytest.raises(RuntimeError, match="Failed to read model parameters"):
            load_params(tmp_path / "missing.bin")

    def test_action_feature_layout(self):
        """Latent frame 0 holds action 0; frame l holds actions 4l-3 to 4l."""
        rows = np.repeat(np.arange(9, dtype=float)[:, None], 7, axis=1)
        features = action_features(rows, 3, 7)
        assert features.shape == (3, 28)
        np.testing.assert_array_equal(features[0, :7], 0.0)
        np.testing.assert_array_equal(features[0, 7:], 0.0)
        np.testing.assert_array_equal(features[1].reshape(4, 7)[:, 0], [1, 2, 3, 4])
        np.testing.assert_array_equal(features[2].reshape(4, 7)[:, 0], [5, 6, 7, 8])


class TestTraining:
    """Tests for the training loop."""

    def _config(self, **kwargs):
        options = dict(epochs=2, batch_size=2, blocks=1, hidden=8, weights=LossWeights(e_switch=1))
        options.update(kwargs)
        return TrainConfig(**options)

    def test_loss_log(self, small_dataset, tmp_path):
        """One finite log row per epoch, readable after writing."""
        _, tuples, _ = small_dataset
        result = train(tuples, self._config())
        assert list(result.log.columns) == LOG_COLUMNS
        assert list(result.log["epoch"]) == [0, 1]
        assert np.all(np.isfinite(result.log[["diff", "dyn", "flow", "total"]].to_numpy()))
        result.write_log(tmp_path / "loss.csv")
        assert read_loss_log(tmp_path / "loss.csv").shape == (2, 5)

    def test_training_is_seeded(self, small_dataset):
        """Equal seeds give equal loss curves."""
        _, tuples, _ = small_dataset
        a = train(tuples, self._config(epochs=1))
        b = train(tuples, self._config(epochs=1))
        np.testing.assert_array_equal(a.log.to_numpy(), b.log.to_numpy())

    def test_control_branch_learns(self, small_dataset):
        """Training moves the fusion layers away from zero."""
        _, tuples, _ = small_dataset
        result = train(tuples, self._config(epochs=1))
        assert any(float(p.abs().sum()) > 0.0 for p in fuse_parameters(result.model))
        assert result.model.video_length == 9

    def test_empty_dataset(self):
        """Training needs at least one tuple."""
        with pytest.raises(ConfigError):
            train([], self._config())

    @pytest.mark.parametrize("kwargs", [{"epochs": 0}, {"learning_rate": 0.0}, {"momentum": 1.0}])
    def test_invalid_config(self, kwargs):
        """Invalid training settings raise ConfigError."""
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)


class TestWorlds:
    """Tests for sampling and the predictor-backed world."""

    def test_ddim_is_deterministic(self, rng):
        """Equal seeds give equal samples; frame 0 is the initial latent."""
        model = _small_model()
        z_init, _, condition = _latents(rng)
        sampler = SamplerConfig(steps=3, seed=4)
        a = ddim_sample(model, z_init, condition, (3, 2, 2, 16), sampler)
        b = ddim_sample(model, z_init, condition, (3, 2, 2, 16), sampler)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a[0], z_init[0])

    def test_sampler_needs_steps(self):
        """Zero sampling steps are invalid."""
        with pytest.raises(ConfigError):
            SamplerConfig(steps=0)

    def test_learned_world_predicts_every_action(self, small_dataset):
        """Predictions hold one frame per action across chunk boundaries."""
        _, tuples, _ = small_dataset
        item = tuples[0]
        world = LearnedWorld(_small_model(), get_task("reach").chains(), item.camera, SamplerConfig(steps=2))
        actions = item.actions[1:].pad_to(10)
        first = world.predict(item.initial_frame, actions, item.state)
        again = world.predict(item.initial_frame, actions, item.state)
        assert world.chunk_length == 8
        assert first.video.pixels.shape == (10, 32, 32, 3)
        assert first.video.pixels.dtype == np.uint8
        np.testing.assert_array_equal(first.video.pixels, again.video.pixels)

    def test_chunk_longer_than_model(self, small_dataset):
        """A single chunk cannot exceed the native length."""
        _, tuples, _ = small_dataset
        item = tuples[0]
        world = LearnedWorld(_small_model(), get_task("reach").chains(), item.camera)
        with pytest.raises(ConfigError):
            world.predict_chunk(item.initial_frame, item.actions, item.state)

    def test_short_model_rejected(self, small_dataset):
        """Models trained on fewer than five frames cannot predict."""
        _, tuples, _ = small_dataset
        with pytest.raises(ConfigError):
            LearnedWorld(_small_model(video_length=1), get_task("reach").chains(), tuples[0].camera)

    def test_static_world(self, small_dataset):
        """The baseline repeats the initial frame."""
        _, tuples, _ = small_dataset
        item = tuples[0]
        prediction = StaticWorld(get_task("reach").chains(), item.camera).predict(
            item.initial_frame, item.actions, item.state
        )
        assert len(prediction.video) == len(item.actions)
        for t in range(len(item.actions)):
            np.testing.assert_array_equal(prediction.video.frame(t), item.initial_frame)

    def test_mask_condition_matches_latent_grid(self, small_dataset):
        """Mask latents of a tuple fit the predictor's latent grid."""
        _, tuples, _ = small_dataset
        item = tuples[0]
        assert encode(item.masks).shape == latent_shape(9, 32, 32)
