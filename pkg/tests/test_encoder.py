# -*- coding: utf-8 -*-

import numpy as np
import pytest

from src.encoder import Encoder, encode, encoder_backward, parse_encoder_spec, window_frames
from src.errors import DataError
from src.training_toolkit import grad_check


class TestEncode:

    def test_identity(self, rng):
        X = rng.standard_normal((5, 3))
        np.testing.assert_array_equal(encode(X, Encoder.create("identity", 3)), X)

    def test_affine_zero_weight_gives_bias(self, rng):
        bias = np.array([1.0, -2.0])
        enc = Encoder("affine", 3, 2, 1, np.zeros((2, 3)), bias)
        out = encode(rng.standard_normal((4, 3)), enc)
        np.testing.assert_array_equal(out, np.tile(bias, (4, 1)))

    def test_window_of_one_equals_affine(self, rng):
        weight, bias = rng.standard_normal((2, 3)), rng.standard_normal(2)
        X = rng.standard_normal((6, 3))
        affine = Encoder("affine", 3, 2, 1, weight, bias)
        window = Encoder("window", 3, 2, 1, weight, bias)
        np.testing.assert_allclose(encode(X, window), encode(X, affine), rtol=1e-12)

    def test_length_preserved(self, rng):
        enc = Encoder.create("window:5", 2, 4, rng=rng)
        assert encode(rng.standard_normal((7, 2)), enc).shape == (7, 4)

    @pytest.mark.parametrize("spec", ["affine", "window:3"])
    def test_square_linear_starts_as_identity(self, rng, spec):
        X = rng.standard_normal((6, 2))
        np.testing.assert_allclose(encode(X, Encoder.create(spec, 2)), X)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DataError):
            encode(rng.standard_normal((4, 2)), Encoder.create("identity", 3))

    def test_window_frames_centered_and_padded(self):
        X = np.arange(1.0, 5.0)[:, None]
        frames = window_frames(X, 3)
        np.testing.assert_array_equal(frames[0], [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(frames[2], [2.0, 3.0, 4.0])
        np.testing.assert_array_equal(frames[3], [3.0, 4.0, 0.0])


class TestEncoderSpec:

    @pytest.mark.parametrize("spec,expected", [("identity", ("identity", 1)), ("affine", ("affine", 1)),
                                               ("window:4", ("window", 4))])
    def test_parse(self, spec, expected):
        assert parse_encoder_spec(spec) == expected

    @pytest.mark.parametrize("spec", ["gru", "window:0", "window:x"])
    def test_invalid(self, spec):
        with pytest.raises(DataError):
            parse_encoder_spec(spec)

    def test_identity_requires_same_width(self):
        with pytest.raises(DataError):
            Encoder("identity", 3, 2)

    def test_param_shapes_checked(self):
        with pytest.raises(DataError):
            Encoder("affine", 3, 2, 1, np.zeros((3, 3)), np.zeros(2))


class TestEncoderBackward:

    def test_identity_has_no_gradient(self, rng):
        X = rng.standard_normal((4, 2))
        assert encoder_backward(X, Encoder.create("identity", 2), np.ones((4, 2))) == {}

    def test_zero_upstream(self, rng):
        X = rng.standard_normal((4, 2))
        grads = encoder_backward(X, Encoder.create("affine", 2, 3, rng=rng), np.zeros((4, 3)))
        assert not grads["encoder.weight"].any() and not grads["encoder.bias"].any()

    @pytest.mark.parametrize("spec", ["affine", "window:3", "window:2"])
    def test_matches_finite_differences(self, rng, spec):
        X = rng.standard_normal((6, 3))
        enc = Encoder.create(spec, 3, 2, rng=rng)
        target = rng.standard_normal((6, 2))

        def loss(p):
            out = encode(X, enc.with_params(p))
            return float(np.sum((out - target) ** 2))

        def grad(p):
            cur = enc.with_params(p)
            return encoder_backward(X, cur, 2 * (encode(X, cur) - target))

        report = grad_check(loss, grad, enc.params())
        assert report.passed, report.max_rel_error

    def test_shape_mismatch(self, rng):
        enc = Encoder.create("affine", 2, 2)
        with pytest.raises(DataError):
            encoder_backward(rng.standard_normal((4, 2)), enc, np.zeros((3, 2)))
