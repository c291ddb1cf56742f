# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from src.errors import DataError, NumericError
from src.training_toolkit import (
    AdamState, BatchSpec, adam_step, grad_check, minibatch_iter, stream_rng,
)


def reference_adam(grads, alpha, beta1=0.9, beta2=0.999, eps=1e-8, start=0.0):
    """逐步手写的标量Adam递推"""
    p, m, v = start, 0.0, 0.0
    trace = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        p = p - alpha * m_hat / (math.sqrt(v_hat) + eps)
        trace.append(p)
    return trace


class TestAdam:

    def test_zero_gradient_leaves_params(self, rng):
        params = {"w": rng.standard_normal((2, 3))}
        state = AdamState.create(params, alpha=0.1)
        updated, state = adam_step(params, {"w": np.zeros((2, 3))}, state)
        np.testing.assert_array_equal(updated["w"], params["w"])
        assert state.step == 1

    def test_zero_gradient_decays_moments(self):
        params = {"w": np.zeros(2)}
        state = AdamState.create(params, alpha=0.1)
        state.m["w"] = np.ones(2)
        state.v["w"] = np.ones(2)
        _, state = adam_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_allclose(state.m["w"], 0.9)
        np.testing.assert_allclose(state.v["w"], 0.999)

    def test_first_step_magnitude_is_alpha(self):
        params = {"w": np.array([1.0, -2.0, 0.5])}
        grads = {"w": np.array([3.0, -0.2, 1e-3])}
        state = AdamState.create(params, alpha=0.01)
        updated, _ = adam_step(params, grads, state)
        delta = updated["w"] - params["w"]
        np.testing.assert_allclose(delta, -0.01 * np.sign(grads["w"]), rtol=1e-4)

    def test_three_step_scalar_trace(self):
        grads = [0.5, -1.5, 2.0]
        expected = reference_adam(grads, alpha=0.05, start=1.0)
        params = {"x": np.array([1.0])}
        state = AdamState.create(params, alpha=0.05)
        for g, want in zip(grads, expected):
            params, state = adam_step(params, {"x": np.array([g])}, state)
            assert params["x"][0] == pytest.approx(want, rel=1e-12)

    def test_scale_consistency(self, rng):
        params = {"w": rng.standard_normal(4)}
        grads = [{"w": rng.standard_normal(4)} for _ in range(3)]

        def run(alpha):
            p, state = dict(params), AdamState.create(params, alpha)
            deltas = []
            for g in grads:
                new, state = adam_step(p, g, state)
                deltas.append(new["w"] - p["w"])
                p = new
            return deltas

        for small, large in zip(run(1e-3), run(5e-3)):
            np.testing.assert_allclose(large, 5 * small, rtol=1e-9)

    def test_does_not_mutate_input(self, rng):
        params = {"w": rng.standard_normal(3)}
        before = params["w"].copy()
        adam_step(params, {"w": np.ones(3)}, AdamState.create(params, 0.1))
        np.testing.assert_array_equal(params["w"], before)

    def test_shape_mismatch(self):
        params = {"w": np.zeros(3)}
        with pytest.raises(DataError):
            adam_step(params, {"w": np.zeros(4)}, AdamState.create(params, 0.1))
        with pytest.raises(DataError):
            adam_step(params, {"v": np.zeros(3)}, AdamState.create(params, 0.1))


class TestMinibatch:

    def test_full_fraction_is_one_batch(self):
        batches = minibatch_iter(7, BatchSpec.fraction(1.0), epoch=1)
        assert len(batches) == 1
        assert sorted(batches[0].tolist()) == list(range(7))

    def test_five_batches_of_two(self):
        batches = minibatch_iter(10, BatchSpec.fraction(0.2), epoch=1)
        assert [len(b) for b in batches] == [2] * 5

    @pytest.mark.parametrize("spec", [BatchSpec.fraction(0.3, seed=4), BatchSpec.count(3, seed=9)])
    def test_each_index_once(self, spec):
        for epoch in range(1, 5):
            batches = minibatch_iter(11, spec, epoch)
            assert sorted(np.concatenate(batches).tolist()) == list(range(11))

    def test_count_mode_batch_number(self):
        assert len(minibatch_iter(10, BatchSpec.count(3), epoch=1)) == 4

    def test_deterministic_per_seed_and_epoch(self):
        spec = BatchSpec.fraction(0.25, seed=7)
        first = minibatch_iter(20, spec, epoch=3)
        second = minibatch_iter(20, spec, epoch=3)
        assert all(np.array_equal(a, b) for a, b in zip(first, second))
        other = minibatch_iter(20, spec, epoch=4)
        assert not all(np.array_equal(a, b) for a, b in zip(first, other))

    def test_invalid_spec(self):
        with pytest.raises(DataError):
            BatchSpec.fraction(0.0)
        with pytest.raises(DataError):
            BatchSpec.count(0)

    def test_stream_rng_is_reproducible(self):
        assert stream_rng(1, 2, 3).integers(1 << 30) == stream_rng(1, 2, 3).integers(1 << 30)


class TestGradCheck:

    def test_quadratic(self, rng):
        A = rng.standard_normal((3, 3))
        A = A @ A.T
        params = {"x": rng.standard_normal(3)}
        report = grad_check(lambda p: float(p["x"] @ A @ p["x"]),
                            lambda p: {"x": 2 * A @ p["x"]}, params)
        assert report.passed
        assert report.max_rel_error["x"] < 1e-8

    def test_wrong_gradient_flagged(self, rng):
        params = {"x": rng.standard_normal(4)}
        report = grad_check(lambda p: float(np.sum(p["x"] ** 2)),
                            lambda p: {"x": 3 * p["x"]}, params)
        assert not report.passed
        assert report.flagged["x"]

    def test_path_change_is_skipped(self):
        params = {"x": np.array([0.0])}
        report = grad_check(lambda p: float(abs(p["x"][0])), lambda p: {"x": np.array([0.0])},
                            params, path_fn=lambda p: bool(p["x"][0] >= 0))
        assert report.skipped == 1 and report.checked == 0

    def test_non_finite_loss(self):
        with pytest.raises(NumericError):
            grad_check(lambda p: float("nan"), lambda p: {"x": np.zeros(1)}, {"x": np.zeros(1)})
