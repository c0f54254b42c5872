import numpy as np
import pytest

from sonnet import autodiff as ad
from sonnet.autodiff import (
    AdamState, Tensor, adam_step, backward, conv1d, adaptive_avg_pool,
    dropout, dropout_rng, gelu, matmul, softmax,
)

from conftest import finite_difference_check


# --------------------------------------------------------------------------
# matmul
# --------------------------------------------------------------------------

def test_matmul_identity(rng):
    b = rng.standard_normal((3, 5))
    out = matmul(Tensor(np.eye(3)), Tensor(b))
    np.testing.assert_array_equal(out.data, b)


def test_matmul_all_ones():
    out = matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    np.testing.assert_array_equal(out.data, np.full((2, 2), 3.0))


def test_matmul_matches_triple_loop(rng):
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((5, 2))
    ref = np.zeros((4, 2))
    for i in range(4):
        for j in range(2):
            for k in range(5):
                ref[i, j] += a[i, k] * b[k, j]
    out = matmul(Tensor(a), Tensor(b))
    np.testing.assert_allclose(out.data, ref, atol=1e-12)


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_matmul_batched_gradients(rng):
    a = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    w = rng.standard_normal((2, 3, 5))
    finite_difference_check(
        {"a": a, "b": b},
        lambda: ad.tsum(matmul(a, b) * Tensor(w)))


def test_matvec_gradient(rng):
    a = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
    v = Tensor(rng.standard_normal(3), requires_grad=True)
    finite_difference_check({"a": a, "v": v}, lambda: ad.tsum(matmul(a, v)))


# --------------------------------------------------------------------------
# elementwise ops and reductions
# --------------------------------------------------------------------------

@pytest.mark.parametrize("op", [ad.texp, ad.tcos, ad.tsin, ad.square, ad.tabs])
def test_elementwise_gradients(op, rng):
    x = Tensor(rng.standard_normal((3, 4)) + 2.0, requires_grad=True)
    w = rng.standard_normal((3, 4))
    finite_difference_check({"x": x}, lambda: ad.tsum(op(x) * Tensor(w)))


def test_broadcast_gradients(rng):
    a = Tensor(rng.standard_normal((3, 1)), requires_grad=True)
    b = Tensor(rng.standard_normal(4), requires_grad=True)
    finite_difference_check({"a": a, "b": b}, lambda: ad.tsum(ad.square(a * b + a)))


def test_sum_mean_axis_gradients(rng):
    x = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
    finite_difference_check(
        {"x": x},
        lambda: ad.tsum(ad.square(ad.tmean(x, axis=1)) * Tensor(np.arange(8.0).reshape(2, 4))))


def test_getitem_concat_gradients(rng):
    x = Tensor(rng.standard_normal(6), requires_grad=True)
    def loss():
        head = x[:3]
        tail = x[3:]
        return ad.tsum(ad.square(ad.concat([tail, head])) * Tensor(np.arange(6.0)))
    finite_difference_check({"x": x}, loss)


# --------------------------------------------------------------------------
# softmax / gelu / dropout
# --------------------------------------------------------------------------

def test_softmax_uniform_vector():
    out = softmax(Tensor(np.full(7, 3.25)))
    np.testing.assert_allclose(out.data, np.full(7, 1 / 7), atol=1e-15)


def test_softmax_sums_to_one(rng):
    out = softmax(Tensor(rng.standard_normal((4, 9))), axis=-1)
    np.testing.assert_allclose(out.data.sum(axis=-1), np.ones(4), atol=1e-14)


def test_softmax_gradient(rng):
    x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    w = rng.standard_normal((3, 5))
    finite_difference_check({"x": x}, lambda: ad.tsum(softmax(x, axis=-1) * Tensor(w)))


def test_gelu_fixed_point_and_reference():
    assert gelu(Tensor(0.0)).data == 0.0
    # exact Gaussian-CDF form at x=1: 1 * Phi(1)
    from scipy.stats import norm
    np.testing.assert_allclose(gelu(Tensor(1.0)).data, norm.cdf(1.0), atol=1e-12)


def test_gelu_gradient(rng):
    x = Tensor(rng.standard_normal(11), requires_grad=True)
    finite_difference_check({"x": x}, lambda: ad.tsum(ad.square(gelu(x))))


def test_dropout_eval_mode_is_identity(rng):
    x = Tensor(rng.standard_normal((5, 5)))
    out = dropout(x, 0.2, dropout_rng(1, 0, 0), training=False)
    np.testing.assert_array_equal(out.data, x.data)


def test_dropout_rate_validation():
    with pytest.raises(ValueError):
        dropout(Tensor(np.ones(3)), 1.0, dropout_rng(1, 0, 0), training=True)


def test_dropout_deterministic_replay():
    x = Tensor(np.ones((100,)))
    a = dropout(x, 0.3, dropout_rng(7, 2, 5), training=True)
    b = dropout(x, 0.3, dropout_rng(7, 2, 5), training=True)
    np.testing.assert_array_equal(a.data, b.data)
    c = dropout(x, 0.3, dropout_rng(7, 2, 6), training=True)
    assert not np.array_equal(a.data, c.data)


# --------------------------------------------------------------------------
# conv1d / adaptive pooling
# --------------------------------------------------------------------------

def _conv1d_loop(x, w, b, padding):
    c_out, c_in, k = w.shape
    xp = np.pad(x, [(0, 0), (padding, padding)])
    L = xp.shape[-1] - k + 1
    out = np.zeros((c_out, L))
    for o in range(c_out):
        for l in range(L):
            acc = b[o]
            for i in range(c_in):
                for kk in range(k):
                    acc += xp[i, l + kk] * w[o, i, kk]
            out[o, l] = acc
    return out


def test_conv1d_matches_loop_oracle(rng):
    x = rng.standard_normal((3, 8))
    w = rng.standard_normal((4, 3, 5))
    b = rng.standard_normal(4)
    out = conv1d(Tensor(x), Tensor(w), Tensor(b), padding=2)
    np.testing.assert_allclose(out.data, _conv1d_loop(x, w, b, 2), atol=1e-12)


def test_conv1d_gradients(rng):
    x = Tensor(rng.standard_normal((1, 2, 8)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 2, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(3), requires_grad=True)
    finite_difference_check(
        {"x": x, "w": w, "b": b},
        lambda: ad.tsum(ad.square(conv1d(x, w, b, padding=1))))


def test_adaptive_avg_pool_exact_division():
    x = Tensor(np.arange(12.0).reshape(1, 12))
    out = adaptive_avg_pool(x, 4)
    np.testing.assert_allclose(out.data, [[1.0, 4.0, 7.0, 10.0]])


def test_adaptive_avg_pool_gradient(rng):
    x = Tensor(rng.standard_normal((2, 10)), requires_grad=True)
    finite_difference_check(
        {"x": x}, lambda: ad.tsum(ad.square(adaptive_avg_pool(x, 3))))


# --------------------------------------------------------------------------
# backward contract
# --------------------------------------------------------------------------

def test_backward_sum_gives_ones(rng):
    w = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    tape = ad.Tape()
    with ad.use_tape(tape):
        backward(ad.tsum(w), tape)
    np.testing.assert_array_equal(w.grad, np.ones((3, 4)))


def test_backward_squared_norm(rng):
    w = Tensor(rng.standard_normal(6), requires_grad=True)
    tape = ad.Tape()
    with ad.use_tape(tape):
        backward(ad.tsum(ad.square(w)), tape)
    np.testing.assert_allclose(w.grad, 2 * w.data, atol=1e-14)


def test_backward_rejects_non_scalar(rng):
    w = Tensor(rng.standard_normal(3), requires_grad=True)
    tape = ad.Tape()
    with ad.use_tape(tape):
        y = ad.square(w)
        with pytest.raises(ValueError):
            backward(y, tape)


def test_cleared_tape_yields_no_gradients(rng):
    w = Tensor(rng.standard_normal(3), requires_grad=True)
    tape = ad.Tape()
    with ad.use_tape(tape):
        loss = ad.tsum(ad.square(w))
        tape.clear()
        backward(loss, tape)
    assert w.grad is None or not w.grad.any()


# --------------------------------------------------------------------------
# Adam
# --------------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    p.grad = np.zeros(2)
    before = p.data.copy()
    adam_step({"p": p}, AdamState(), lr=0.1)
    np.testing.assert_array_equal(p.data, before)


def test_adam_first_step_direction():
    p = Tensor(np.array([1.0, -1.0, 0.5]), requires_grad=True)
    p.grad = np.array([0.3, -0.2, 0.7])
    before = p.data.copy()
    adam_step({"p": p}, AdamState(), lr=0.01)
    step = p.data - before
    np.testing.assert_allclose(step, -0.01 * np.sign(p.grad), rtol=1e-4)


def test_adam_converges_on_quadratic():
    w = Tensor(np.array(0.0), requires_grad=True)
    state = AdamState()
    for _ in range(100):
        w.grad = np.asarray(2 * (w.data - 3.0))
        adam_step({"w": w}, state, lr=0.1)
    assert abs(float(w.data) - 3.0) < 0.05
