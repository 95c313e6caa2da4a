"""Tensor-core semantics: forward values against NumPy oracles, tape
mechanics, the finite-difference battery, and the Adam update rule.
"""

import math

import numpy as np
import pytest

from churnforge.errors import ShapeError
from churnforge.selfcheck import op_checks
from churnforge.tensor import (
    AdamState,
    GradTape,
    Tensor,
    adam_step,
    add,
    backward,
    bce_with_logits,
    conv2d,
    dropout,
    gelu,
    matmul,
    maxpool2d,
    mean,
    mul,
    normalize,
    relu,
    sigmoid,
    softmax,
    sum_,
)


class TestForwardSemantics:
    """Forward values must agree with direct NumPy computation."""

    def test_add_broadcasts_like_numpy(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(1, 4))
        np.testing.assert_array_equal(add(Tensor(a), Tensor(b)).data, a + b)

    def test_matmul_batched(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(5, 3, 4)), rng.normal(size=(5, 4, 2))
        np.testing.assert_allclose(
            matmul(Tensor(a), Tensor(b)).data, a @ b, rtol=1e-13
        )

    def test_relu_and_gelu_closed_form(self):
        x = np.linspace(-4, 4, 101)
        np.testing.assert_array_equal(relu(Tensor(x)).data, np.maximum(x, 0))
        want = x * 0.5 * (1 + np.vectorize(math.erf)(x / math.sqrt(2)))
        np.testing.assert_allclose(gelu(Tensor(x)).data, want, atol=1e-12)

    def test_sigmoid_is_stable_at_extremes(self):
        x = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
        got = sigmoid(Tensor(x)).data
        assert np.all(np.isfinite(got))
        np.testing.assert_allclose(got[2], 0.5, atol=1e-15)
        assert got[0] >= 0 and got[-1] <= 1

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 9)) * 50  # large logits: needs the shift trick
        got = softmax(Tensor(x), axis=-1).data
        np.testing.assert_allclose(got.sum(axis=-1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(np.argmax(got, -1), np.argmax(x, -1))

    def test_conv2d_direct_oracle(self):
        """Cross-correlation equals an explicit quadruple loop."""
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 3, 6, 5))
        w = rng.normal(size=(4, 3, 3, 2))
        got = conv2d(Tensor(x), Tensor(w), stride=(2, 1), padding=(1, 0)).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (0, 0)))
        ho, wo = (6 + 2 - 3) // 2 + 1, (5 - 2) // 1 + 1
        want = np.zeros((2, 4, ho, wo))
        for b in range(2):
            for f in range(4):
                for i in range(ho):
                    for j in range(wo):
                        patch = xp[b, :, 2 * i : 2 * i + 3, j : j + 2]
                        want[b, f, i, j] = np.sum(patch * w[f])
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_maxpool_matches_blockwise_max(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 3, 6, 4))
        got = maxpool2d(Tensor(x), (2, 2)).data
        want = x.reshape(2, 3, 3, 2, 2, 2).max(axis=(3, 5))
        np.testing.assert_array_equal(got, want)

    def test_normalize_batch_zero_mean_unit_var(self):
        rng = np.random.default_rng(5)
        x = rng.normal(loc=3.0, scale=2.0, size=(32, 7))
        gamma, beta = Tensor(np.ones(7)), Tensor(np.zeros(7))
        out, mu, var = normalize(Tensor(x), gamma, beta, axes=(0,))
        np.testing.assert_allclose(out.data.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.data.std(axis=0), 1.0, atol=1e-3)
        np.testing.assert_allclose(mu, x.mean(axis=0, keepdims=True), atol=1e-12)
        np.testing.assert_allclose(var, x.var(axis=0, keepdims=True), atol=1e-12)

    def test_bce_matches_closed_form(self):
        rng = np.random.default_rng(6)
        z = rng.normal(size=(8, 4))
        y = (rng.random((8, 4)) < 0.5).astype(np.float64)
        got = bce_with_logits(Tensor(z), Tensor(y)).data
        p = 1 / (1 + np.exp(-z))
        want = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
        np.testing.assert_allclose(got, want, rtol=1e-10)

    def test_dropout_semantics(self):
        rng_data = np.random.default_rng(7)
        x = Tensor(rng_data.normal(size=(200, 50)))
        same = dropout(x, 0.0, "train", np.random.default_rng(0))
        np.testing.assert_array_equal(same.data, x.data)
        infer = dropout(x, 0.7, "infer", np.random.default_rng(0))
        np.testing.assert_array_equal(infer.data, x.data)
        a = dropout(x, 0.5, "train", np.random.default_rng(3)).data
        b = dropout(x, 0.5, "train", np.random.default_rng(3)).data
        np.testing.assert_array_equal(a, b)  # same rng stream, same mask
        kept = a != 0
        np.testing.assert_allclose(kept.mean(), 0.5, atol=0.02)
        np.testing.assert_allclose(a[kept], x.data[kept] / 0.5, rtol=1e-12)


class TestTapeMechanics:
    """Recording, accumulation, and the scalar-loss contract."""

    def test_ops_outside_tape_are_untracked(self):
        a = Tensor(np.ones(3), requires_grad=True)
        out = mul(a, a)
        assert out.requires_grad is False

    def test_tapes_do_not_nest(self):
        with GradTape():
            with pytest.raises(RuntimeError):
                with GradTape():
                    pass

    def test_backward_requires_scalar(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        with GradTape() as tape:
            out = mul(a, a)
        with pytest.raises(ShapeError):
            backward(out, tape)

    def test_gradients_accumulate_across_tapes(self):
        """.grad sums across backward calls until cleared by the caller."""
        a = Tensor(np.array([2.0, -1.0]), requires_grad=True)
        for _ in range(2):
            with GradTape() as tape:
                loss = sum_(mul(a, a))
            backward(loss, tape)
        np.testing.assert_allclose(a.grad, 2 * (2 * a.data), atol=1e-12)

    def test_unreached_parameter_keeps_none_grad(self):
        a = Tensor(np.ones(2), requires_grad=True)
        b = Tensor(np.ones(2), requires_grad=True)
        with GradTape() as tape:
            loss = sum_(mul(a, a))
        backward(loss, tape)
        assert b.grad is None
        assert a.grad is not None

    def test_shared_operand_gradient_sums(self):
        """d/da (a*a) = 2a exercises in-graph accumulation on one node."""
        a = Tensor(np.array([3.0]), requires_grad=True)
        with GradTape() as tape:
            loss = sum_(mul(a, a))
        backward(loss, tape)
        np.testing.assert_allclose(a.grad, [6.0], atol=1e-12)

    def test_mean_gradient_is_uniform(self):
        a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        with GradTape() as tape:
            loss = mean(a)
        backward(loss, tape)
        np.testing.assert_allclose(a.grad, np.full((2, 3), 1 / 6), atol=1e-15)


class TestFiniteDifferenceBattery:
    """Every differentiable op passes the finite-difference comparison."""

    def test_all_op_checks_pass(self):
        results = op_checks(seed=0, tol=1e-4)
        assert len(results) >= 30
        bad = [(n, r.max_rel_error) for n, r in results if not r.passed]
        assert not bad, f"gradient checks failed: {bad}"


class TestAdam:
    """The update rule, None-grad skipping, and determinism."""

    def test_first_step_is_signed_lr(self):
        """With bias correction, step 1 moves each weight by ~ -lr*sign(g)."""
        p = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
        p.grad = np.array([0.3, -0.7, 2.0])
        before = p.data.copy()
        state = AdamState([p], lr=1e-2)
        adam_step(state)
        delta = p.data - before
        np.testing.assert_allclose(
            delta, -1e-2 * np.sign(p.grad), rtol=1e-6
        )

    def test_none_grad_parameter_is_skipped(self):
        p = Tensor(np.ones(2), requires_grad=True)
        q = Tensor(np.ones(2), requires_grad=True)
        p.grad = np.ones(2)
        q.grad = None
        state = AdamState([p, q], lr=0.1)
        adam_step(state)
        np.testing.assert_array_equal(q.data, np.ones(2))
        assert not np.array_equal(p.data, np.ones(2))

    def test_two_steps_deterministic(self):
        def run():
            p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
            state = AdamState([p], lr=0.05)
            for g in ([0.5, -1.0], [0.25, 0.1]):
                p.grad = np.array(g)
                adam_step(state)
            return p.data.copy()

        np.testing.assert_array_equal(run(), run())
