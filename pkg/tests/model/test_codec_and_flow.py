"""
Tests for the fixed latent codec and the frozen flow estimator.
"""

import numpy as np
import pytest

from src.model.codec import (
    codec_basis, decode, decode_pixels, encode, latent_shape, read_latent, write_latent, LatentVideo,
)
from src.model.flow import (
    FlowField, estimate_flow, flow_discrepancy, flow_loss, huber, max_displacement, read_flow, write_flow,
)
from src.render.frames import MaskVideo, RgbVideo
from src.utils.errors import ShapeError


class TestLatentCodec:
    """Tests for the linear latent codec."""

    def test_latent_shape(self, expected_values):
        """25 frames of 480x720 give a (7, 60, 90, 16) latent."""
        assert latent_shape(25, 480, 720) == expected_values["latent_shape_25_480_720"]
        assert encode(np.zeros((5, 16, 24, 3))).shape == (2, 2, 3, 16)

    @pytest.mark.parametrize("frames,height,width", [(24, 64, 64), (25, 60, 64), (0, 64, 64)])
    def test_shape_contracts(self, frames, height, width):
        """Lengths other than 1 (mod 4) and sizes not divisible by 8 are rejected."""
        with pytest.raises(ShapeError):
            latent_shape(frames, height, width)

    def test_basis_is_orthonormal(self):
        """The 16 basis patterns are orthonormal."""
        flat = codec_basis().reshape(16, -1)
        np.testing.assert_allclose(flat @ flat.T, np.eye(16), atol=1e-12)

    def test_encode_inverts_decode(self, rng):
        """encode(decode(z)) recovers any latent."""
        z = rng.standard_normal((3, 2, 2, 16))
        np.testing.assert_allclose(encode(decode(z)).data, z, atol=1e-10)

    def test_decode_is_projection(self, rng):
        """Decoding an encoded video is idempotent under the codec."""
        video = rng.uniform(0, 255, size=(5, 16, 16, 3))
        once = encode(video)
        twice = encode(decode(once))
        np.testing.assert_allclose(twice.data, once.data, atol=1e-9)

    def test_zero_latent_is_mid_grey(self):
        """The zero latent decodes to 127.5 everywhere."""
        np.testing.assert_allclose(decode_pixels(np.zeros((2, 1, 1, 16))), 127.5)

    def test_flat_colour_is_exact(self):
        """Uniform colours survive the codec."""
        video = np.broadcast_to(np.array([255.0, 32.0, 32.0]), (5, 8, 8, 3))
        np.testing.assert_allclose(decode(encode(video)).pixels, video, atol=1e-9)

    def test_masks_encode_as_rgb(self):
        """Mask videos are lifted to three channels before encoding."""
        masks = MaskVideo(np.ones((1, 8, 8), dtype=bool))
        np.testing.assert_allclose(decode(encode(masks)).pixels, 255.0, atol=1e-9)

    def test_latent_file(self, tmp_path, rng):
        """Latent files store float32 values."""
        z = LatentVideo(rng.standard_normal((2, 1, 3, 16)))
        write_latent(tmp_path / "z.bin", z)
        np.testing.assert_allclose(read_latent(tmp_path / "z.bin").data, z.data, atol=1e-6)

    def test_bad_channels(self):
        """Latents must have 16 channels."""
        with pytest.raises(ShapeError):
            LatentVideo(np.zeros((1, 1, 1, 8)))


class TestFlowEstimator:
    """Tests for block-matching flow."""

    def test_static_video_has_no_flow(self, rng):
        """Repeated frames give zero flow and zero flow loss."""
        frame = rng.integers(0, 256, size=(32, 32, 3)).astype(np.uint8)
        video = RgbVideo(np.stack([frame] * 3))
        flow = estimate_flow(video)
        assert flow.data.shape == (2, 32, 32, 2)
        assert np.all(flow.data == 0)
        assert flow_loss(video, video) == 0.0

    def test_recovers_translation(self, rng):
        """A shifted random texture is matched exactly away from the borders."""
        frame = rng.integers(0, 256, size=(64, 64, 3)).astype(np.uint8)
        shifted = np.roll(frame, shift=(2, 3), axis=(0, 1))
        flow = estimate_flow(RgbVideo(np.stack([frame, shifted])))
        interior = flow.data[0, 16:48, 16:48]
        assert np.all(interior[..., 0] == 3)
        assert np.all(interior[..., 1] == 2)

    def test_max_displacement(self):
        """Three levels of +-4 px reach 28 px."""
        assert max_displacement() == 28

    def test_needs_two_frames(self):
        """A single frame has no flow."""
        with pytest.raises(ShapeError):
            estimate_flow(RgbVideo(np.zeros((1, 8, 8, 3))))

    def test_discrepancy_of_reversed_flow(self):
        """Opposite flow of equal length costs exactly 2 per moving pixel."""
        true = FlowField(np.full((1, 8, 8, 2), 2.0))
        assert flow_discrepancy(true, true) == 0.0
        assert flow_discrepancy(FlowField(-true.data), true) == pytest.approx(2.0)

    def test_discrepancy_ignores_still_pixels(self):
        """Pixels without true motion do not contribute."""
        true = FlowField(np.zeros((1, 8, 8, 2)))
        predicted = FlowField(np.ones((1, 8, 8, 2)))
        assert flow_discrepancy(predicted, true) == 0.0

    def test_huber(self):
        """Quadratic inside delta, linear outside."""
        np.testing.assert_allclose(huber(np.array([0.5, 3.0])), [0.125, 2.5])

    def test_non_finite_flow_rejected(self):
        """Flow fields must be finite."""
        with pytest.raises(ShapeError):
            FlowField(np.full((1, 8, 8, 2), np.nan))

    def test_flow_file(self, tmp_path):
        """Flow files keep the field."""
        flow = FlowField(np.arange(2 * 8 * 8 * 2, dtype=float).reshape(2, 8, 8, 2))
        write_flow(tmp_path / "f.bin", flow)
        np.testing.assert_array_equal(read_flow(tmp_path / "f.bin").data, flow.data)
