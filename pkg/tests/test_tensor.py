"""Tensor op semantics against brute-force oracles, plus tape invariants
and finite-difference gradient checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from istpa import tensor as T
from istpa.errors import ContractError, DimensionError, ParameterError
from istpa.tensor import Tape, Tensor, grad_check

RNG = np.random.default_rng(1234)


def loop_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def loop_conv2d(x, kernel, stride, padding):
    K, W, H, Cin = x.shape
    kh, kw, _, Cout = kernel.shape
    if padding == "same":
        Wout, Hout = -(-W // stride), -(-H // stride)
        pw = max((Wout - 1) * stride + kh - W, 0)
        ph = max((Hout - 1) * stride + kw - H, 0)
        x = np.pad(x, ((0, 0), (pw // 2, pw - pw // 2), (ph // 2, ph - ph // 2), (0, 0)))
    else:
        Wout, Hout = (W - kh) // stride + 1, (H - kw) // stride + 1
    out = np.zeros((K, Wout, Hout, Cout))
    for n in range(K):
        for i in range(Wout):
            for j in range(Hout):
                for co in range(Cout):
                    acc = 0.0
                    for di in range(kh):
                        for dj in range(kw):
                            for ci in range(Cin):
                                acc += x[n, i * stride + di, j * stride + dj, ci] * kernel[di, dj, ci, co]
                    out[n, i, j, co] = acc
    return out


def loop_adaptive_pool(x, target):
    K, W, H, C = x.shape
    Wp, Hp = target
    out = np.zeros((K, Wp, Hp, C))
    for m in range(Wp):
        r0, r1 = (m * W) // Wp, -((-(m + 1) * W) // Wp)
        for n in range(Hp):
            c0, c1 = (n * H) // Hp, -((-(n + 1) * H) // Hp)
            out[:, m, n, :] = x[:, r0:r1, c0:c1, :].max(axis=(1, 2))
    return out


class TestForwardOracles:
    def test_matmul_matches_triple_loop(self):
        a, b = RNG.standard_normal((4, 5)), RNG.standard_normal((5, 3))
        np.testing.assert_allclose(T.matmul(Tensor(a), Tensor(b)).data, loop_matmul(a, b), atol=1e-12)

    def test_matmul_shape_mismatch(self):
        with pytest.raises(DimensionError):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("padding", ["same", "valid"])
    def test_conv2d_matches_loop(self, stride, padding):
        x = RNG.standard_normal((2, 7, 6, 3))
        kernel = RNG.standard_normal((3, 3, 3, 4))
        got = T.conv2d(Tensor(x), Tensor(kernel), stride=stride, padding=padding).data
        np.testing.assert_allclose(got, loop_conv2d(x, kernel, stride, padding), atol=1e-12)

    def test_conv2d_rejects_bad_args(self):
        x, k = Tensor(np.ones((1, 4, 4, 1))), Tensor(np.ones((3, 3, 1, 1)))
        with pytest.raises(ParameterError):
            T.conv2d(x, k, stride=0)
        with pytest.raises(ParameterError):
            T.conv2d(x, k, padding="full")
        with pytest.raises(DimensionError):
            T.conv2d(x, Tensor(np.ones((3, 3, 2, 1))))

    @pytest.mark.parametrize("shape,target", [((2, 4, 4, 3), (2, 2)), ((1, 5, 7, 2), (2, 3)), ((3, 6, 6, 1), (4, 4))])
    def test_adaptive_pool_matches_window_enumeration(self, shape, target):
        x = RNG.standard_normal(shape)
        got = T.adaptive_max_pool2d(Tensor(x), target).data
        np.testing.assert_allclose(got, loop_adaptive_pool(x, target), atol=0)

    def test_adaptive_pool_rejects_upsampling(self):
        with pytest.raises(DimensionError):
            T.adaptive_max_pool2d(Tensor(np.ones((1, 2, 2, 1))), (4, 4))

    def test_relu_pointwise(self):
        x = np.array([[-1.0, 0.0, 2.5]])
        np.testing.assert_array_equal(T.relu(Tensor(x)).data, [[0.0, 0.0, 2.5]])

    def test_elementwise_combine_kinds(self):
        a, b = RNG.standard_normal((2, 3)), RNG.standard_normal((2, 3))
        ta, tb = Tensor(a), Tensor(b)
        np.testing.assert_allclose(T.elementwise_combine("sum", [ta, tb]).data, a + b)
        np.testing.assert_allclose(T.elementwise_combine("multiplication", [ta, tb]).data, a * b)
        np.testing.assert_allclose(T.elementwise_combine("maximum", [ta, tb]).data, np.maximum(a, b))
        with pytest.raises(ParameterError):
            T.elementwise_combine("mean", [ta, tb])

    def test_maximum_tie_routes_to_first_operand(self):
        a, b = Tensor(np.array([[1.0, 2.0]])), Tensor(np.array([[1.0, 0.0]]))
        with Tape() as tape:
            loss = T.sum_all(T.elementwise_combine("maximum", [a, b]))
        tape.backward(loss)
        np.testing.assert_array_equal(a.grad, [[1.0, 1.0]])
        np.testing.assert_array_equal(b.grad, [[0.0, 0.0]])

    def test_cross_entropy_matches_naive(self):
        logits = RNG.standard_normal(4)
        p = np.exp(logits) / np.exp(logits).sum()
        got = T.cross_entropy_logits(Tensor(logits), 2).item()
        assert got == pytest.approx(-np.log(p[2]), abs=1e-12)

    def test_cross_entropy_rows_matches_scalar_version(self):
        logits = RNG.standard_normal((5, 3))
        labels = RNG.integers(0, 3, size=5)
        rows = T.cross_entropy_rows(Tensor(logits), labels).data
        for i in range(5):
            single = T.cross_entropy_logits(Tensor(logits[i]), int(labels[i])).item()
            assert rows[i] == pytest.approx(single, abs=1e-12)

    def test_cross_entropy_label_range(self):
        with pytest.raises(ContractError):
            T.cross_entropy_logits(Tensor(np.zeros(3)), 3)
        with pytest.raises(ContractError):
            T.cross_entropy_rows(Tensor(np.zeros((2, 3))), [0, 5])

    def test_sqrt_clamped_floor(self):
        got = T.sqrt_clamped(Tensor(np.array([4.0, 0.0, -3.0]))).data
        np.testing.assert_array_equal(got, [2.0, 0.0, 0.0])


class TestNormalizations:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_softmax_rows_sum_to_one(self, seed):
        x = np.random.default_rng(seed).standard_normal((4, 7)) * 10.0
        s = T.softmax_rows(Tensor(x)).data
        np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
        assert (s > 0.0).all()

    @given(st.integers(0, 2**32 - 1), st.floats(-50.0, 50.0))
    @settings(max_examples=30, deadline=None)
    def test_softmax_shift_invariance(self, seed, shift):
        x = np.random.default_rng(seed).standard_normal((3, 5))
        np.testing.assert_allclose(
            T.softmax_rows(Tensor(x)).data, T.softmax_rows(Tensor(x + shift)).data, atol=1e-12
        )

    def test_softmax_extreme_logits_stable(self):
        s = T.softmax_rows(Tensor(np.array([[1000.0, 0.0, -1000.0]]))).data
        assert np.isfinite(s).all()
        assert s[0, 0] == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_l2_rows_unit_norm(self, seed):
        x = np.random.default_rng(seed).standard_normal((4, 6)) + 0.5
        y = T.l2_normalize_rows(Tensor(x)).data
        np.testing.assert_allclose(np.sqrt((y * y).sum(axis=1)), 1.0, atol=1e-12)

    def test_l2_degenerate_rows_pass_through(self):
        x = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]])
        out = T.l2_normalize_rows(Tensor(x))
        np.testing.assert_array_equal(out.degenerate_rows, [True, False])
        np.testing.assert_array_equal(out.data[0], x[0])
        np.testing.assert_allclose(out.data[1], [0.6, 0.8, 0.0], atol=1e-12)


class TestTape:
    def test_backward_requires_scalar(self):
        x = Tensor(np.ones((2, 2)))
        with Tape() as tape:
            y = T.square(x)
        with pytest.raises(ContractError):
            tape.backward(y)

    def test_fan_out_accumulates(self):
        x = Tensor(np.array(3.0))
        with Tape() as tape:
            y = T.add(T.square(x), T.square(x))  # 2 x^2, dy/dx = 4x
        tape.backward(y)
        assert x.grad == pytest.approx(12.0, abs=1e-12)

    def test_double_backward_doubles_gradients(self):
        x = Tensor(RNG.standard_normal((3, 3)))
        with Tape() as tape:
            loss = T.sum_all(T.square(x))
        tape.backward(loss)
        once = x.grad.copy()
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, 2.0 * once)

    def test_unreachable_ops_get_no_gradient(self):
        x, z = Tensor(np.array(2.0)), Tensor(np.array(5.0))
        with Tape() as tape:
            loss = T.square(x)
            T.square(z)  # on the tape but not feeding the loss
        tape.backward(loss)
        assert z.grad is None

    def test_no_active_tape_means_no_recording(self):
        x = Tensor(np.array(2.0))
        y = T.square(x)
        assert y.item() == 4.0
        tape = Tape()
        assert len(tape) == 0

    def test_nested_tapes_restore_outer(self):
        with Tape() as outer:
            x = Tensor(np.array(1.0))
            with Tape():
                T.square(x)
            T.square(x)
        assert len(outer) == 1


class TestGradChecks:
    def check(self, f, xs, tol=1e-6):
        err = grad_check(f, xs)
        assert err < tol, f"gradient error {err:.3e}"

    def test_matmul(self):
        self.check(
            lambda a, b: T.sum_all(T.square(T.matmul(a, b))),
            [Tensor(RNG.standard_normal((3, 4))), Tensor(RNG.standard_normal((4, 2)))],
        )

    def test_affine(self):
        self.check(
            lambda x, w, b: T.sum_all(T.square(T.affine(x, w, b))),
            [Tensor(RNG.standard_normal((3, 4))), Tensor(RNG.standard_normal((4, 2))), Tensor(RNG.standard_normal(2))],
        )

    def test_col_and_channel_bias(self):
        self.check(
            lambda m, b: T.sum_all(T.square(T.add_col_bias(m, b))),
            [Tensor(RNG.standard_normal((3, 5))), Tensor(RNG.standard_normal(3))],
        )
        self.check(
            lambda x, b: T.sum_all(T.square(T.add_channel_bias(x, b))),
            [Tensor(RNG.standard_normal((2, 3, 3, 4))), Tensor(RNG.standard_normal(4))],
        )

    def test_softmax_and_l2(self):
        x = Tensor(RNG.standard_normal((3, 5)))
        self.check(lambda t: T.sum_all(T.square(T.softmax_rows(t))), x)
        y = Tensor(RNG.standard_normal((3, 5)) + 1.0)
        self.check(lambda t: T.sum_all(T.square(T.l2_normalize_rows(t))), y)

    @pytest.mark.parametrize("kind", ["maximum", "sum", "multiplication"])
    def test_elementwise_combine(self, kind):
        xs = [Tensor(RNG.standard_normal((2, 4))) for _ in range(3)]
        self.check(lambda *ts: T.sum_all(T.square(T.elementwise_combine(kind, ts))), xs)

    @pytest.mark.parametrize("stride,padding", [(1, "same"), (1, "valid"), (2, "same"), (2, "valid")])
    def test_conv2d(self, stride, padding):
        self.check(
            lambda x, k: T.sum_all(T.square(T.conv2d(x, k, stride=stride, padding=padding))),
            [Tensor(RNG.standard_normal((2, 5, 5, 2))), Tensor(RNG.standard_normal((3, 3, 2, 2)))],
        )

    @pytest.mark.parametrize("shape,target", [((1, 4, 4, 2), (2, 2)), ((2, 5, 5, 1), (2, 2))])
    def test_adaptive_pool(self, shape, target):
        # distinct integer entries keep the argmax away from the finite
        # difference step
        x = Tensor(RNG.permutation(np.prod(shape)).astype(float).reshape(shape))
        self.check(lambda t: T.sum_all(T.square(T.adaptive_max_pool2d(t, target))), x)

    def test_sqrt_clamped(self):
        x = Tensor(np.abs(RNG.standard_normal(5)) + 0.5)
        self.check(lambda t: T.sum_all(T.sqrt_clamped(t)), x)

    def test_batched_ops(self):
        self.check(
            lambda a, b: T.sum_all(T.square(T.bmm(a, b))),
            [Tensor(RNG.standard_normal((2, 3, 4))), Tensor(RNG.standard_normal((2, 4, 2)))],
        )
        x = Tensor(RNG.standard_normal((2, 3, 4)))
        self.check(lambda t: T.sum_all(T.square(T.permute(t, (2, 0, 1)))), x)
        y = Tensor(RNG.standard_normal((3, 5)))
        self.check(lambda t: T.sum_all(T.square(T.sum_rows(t))), y)
        z = Tensor(RNG.standard_normal((5, 3)))
        self.check(lambda t: T.sum_all(T.square(T.slice_axis0(t, 1, 4))), z)

    def test_cross_entropy(self):
        self.check(lambda t: T.cross_entropy_logits(t, 1), Tensor(RNG.standard_normal(4)))
        labels = [0, 2, 1]
        self.check(lambda t: T.sum_all(T.cross_entropy_rows(t, labels)), Tensor(RNG.standard_normal((3, 3))))

    def test_reshape_and_transpose(self):
        self.check(
            lambda t: T.sum_all(T.square(T.transpose2d(T.reshape(t, (2, 6))))),
            Tensor(RNG.standard_normal((3, 4))),
        )
