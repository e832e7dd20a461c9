import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgattn import autodiff as ad
from kgattn.autodiff import Tensor
from kgattn.errors import DimensionError

from helpers import check_grads, numeric_grad, rand_tensor, rel_err

RNG = np.random.default_rng(12345)


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(Tensor(np.eye(2)), Tensor([[1.0, 2.0], [3.0, 4.0]]))
        assert np.array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])

    def test_unit_selection(self):
        out = ad.matmul(Tensor([[1.0, 0.0]]), Tensor([[2.0], [3.0]]))
        assert np.array_equal(out.data, [[2.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(3, 4\).*\(3, 2\)"):
            ad.matmul(rand_tensor(RNG, 3, 4), rand_tensor(RNG, 3, 2))

    def test_gradient_matches_finite_differences(self):
        a, b = rand_tensor(RNG, 3, 4), rand_tensor(RNG, 4, 2)
        check_grads(lambda: ad.sum_all(ad.matmul(a, b)), [a, b], tol=1e-6)

    @pytest.mark.parametrize("sa,sb", [((4,), (4,)), ((4,), (4, 3)), ((3, 4), (4,))])
    def test_vector_cases_gradient(self, sa, sb):
        a, b = rand_tensor(RNG, *sa), rand_tensor(RNG, *sb)
        check_grads(lambda: ad.sum_all(ad.matmul(a, b)), [a, b], tol=1e-6)


class TestSoftmax:
    def test_uniform_logits(self):
        assert np.allclose(ad.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])

    def test_two_logits(self):
        out = ad.softmax(Tensor([1.0, 0.0])).data
        assert abs(out[0] - 0.73106) < 1e-5
        assert abs(out[1] - 0.26894) < 1e-5

    def test_single_element(self):
        assert np.array_equal(ad.softmax(Tensor([3.7])).data, [1.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ad.softmax(Tensor(np.zeros(0)))

    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=12))
    def test_sums_to_one_and_shift_invariant(self, logits):
        z = np.array(logits)
        p = ad.softmax(Tensor(z)).data
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p > 0)
        shifted = ad.softmax(Tensor(z + 17.25)).data
        assert np.abs(p - shifted).max() < 1e-12

    def test_gradient(self):
        z = rand_tensor(RNG, 6)
        w = rand_tensor(RNG, 6)  # random readout to make a scalar
        check_grads(lambda: ad.matmul(ad.softmax(z), w), [z], tol=1e-6)

    def test_rowwise_gradient(self):
        z = rand_tensor(RNG, 3, 5)
        w = rand_tensor(RNG, 5)
        check_grads(lambda: ad.sum_all(ad.matmul(ad.softmax(z), w)), [z], tol=1e-6)


class TestCrossEntropy:
    def test_one_hot_correct(self):
        assert ad.cross_entropy(Tensor([1.0, 0.0, 0.0]), 0).item() == 0.0

    def test_uniform_is_log_k(self):
        out = ad.cross_entropy(Tensor([0.25] * 4), 2).item()
        assert abs(out - np.log(4)) < 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            ad.cross_entropy(Tensor([0.5, 0.5]), 2)

    def test_gradient_through_softmax(self):
        z = rand_tensor(RNG, 5)
        check_grads(lambda: ad.cross_entropy(ad.softmax(z), 3), [z], tol=1e-6)

    def test_batched_matches_single(self):
        p = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]])
        batched = ad.cross_entropy(Tensor(p), np.array([0, 1]))
        singles = [ad.cross_entropy(Tensor(p[i]), i_lab).item() for i, i_lab in enumerate([0, 1])]
        assert np.allclose(batched.data, singles)


class TestElementwise:
    def test_relu_definition(self):
        assert np.array_equal(ad.relu(Tensor([-1.0, 2.0])).data, [0.0, 2.0])

    @pytest.mark.parametrize("op", [ad.relu, ad.sigmoid, ad.tanh, ad.abs_])
    def test_gradients(self, op):
        # keep samples away from the relu/abs kink at zero
        x = Tensor(RNG.uniform(0.1, 1.0, size=(3, 4)) * RNG.choice([-1.0, 1.0], size=(3, 4)))
        check_grads(lambda: ad.sum_all(op(x)), [x], tol=1e-5)

    def test_sqrt_gradient(self):
        x = rand_tensor(RNG, 5, lo=0.5, hi=2.0)
        check_grads(lambda: ad.sum_all(ad.sqrt_(x)), [x], tol=1e-6)

    def test_mul_add_scale_gradients(self):
        a, b = rand_tensor(RNG, 4, 3), rand_tensor(RNG, 4, 3)
        check_grads(lambda: ad.sum_all(ad.mul(a, b)), [a, b], tol=1e-6)
        check_grads(lambda: ad.sum_all(ad.add(a, b)), [a, b], tol=1e-6)
        check_grads(lambda: ad.sum_all(ad.scale(ad.add_const(a, 0.7), -2.5)), [a], tol=1e-6)

    def test_bias_broadcast_gradient(self):
        a, b = rand_tensor(RNG, 4, 3), rand_tensor(RNG, 3)
        check_grads(lambda: ad.sum_all(ad.add(a, b)), [a, b], tol=1e-6)


class TestShapeOps:
    def test_concat_splits_gradient_exactly(self):
        a, b = rand_tensor(RNG, 3), rand_tensor(RNG, 4)
        w = rand_tensor(RNG, 7)
        loss = ad.matmul(ad.concat(a, b), w)
        loss.backward()
        assert np.array_equal(a.grad, w.data[:3])
        assert np.array_equal(b.grad, w.data[3:])

    def test_concat_2d_gradient(self):
        a, b = rand_tensor(RNG, 2, 3), rand_tensor(RNG, 2, 2)
        check_grads(lambda: ad.sum_all(ad.mul(ad.concat(a, b), ad.concat(a, b))), [a, b], tol=1e-6)

    def test_slice_cols_gradient(self):
        x = rand_tensor(RNG, 2, 8)
        check_grads(lambda: ad.sum_all(ad.mul(ad.slice_cols(x, 2, 5), ad.slice_cols(x, 2, 5))),
                    [x], tol=1e-6)

    def test_take_rows_gradient_accumulates_repeats(self):
        table = rand_tensor(RNG, 5, 3)
        idx = np.array([1, 1, 4])
        loss = ad.sum_all(ad.take_rows(table, idx))
        loss.backward()
        expected = np.zeros((5, 3))
        expected[1] = 2.0
        expected[4] = 1.0
        assert np.array_equal(table.grad, expected)

    def test_stack_rows_and_transpose_gradient(self):
        vs = [rand_tensor(RNG, 4) for _ in range(3)]
        w = rand_tensor(RNG, 3)
        check_grads(lambda: ad.sum_all(ad.matmul(ad.transpose(ad.stack_rows(vs)), w)), vs, tol=1e-6)

    def test_reshape_gradient(self):
        x = rand_tensor(RNG, 2, 6)
        check_grads(lambda: ad.sum_all(ad.mul(ad.reshape(x, (3, 4)), ad.reshape(x, (3, 4)))),
                    [x], tol=1e-6)


class TestMeanOverTime:
    def test_distributes_inverse_count_to_real_steps_only(self):
        hs = [rand_tensor(RNG, 4) for _ in range(3)]
        mask = np.array([True, True, False])
        out = ad.sum_all(ad.mean_over_time(hs, mask))
        out.backward()
        assert np.allclose(hs[0].grad, 0.5)
        assert np.allclose(hs[1].grad, 0.5)
        assert np.array_equal(hs[2].grad, np.zeros(4))

    def test_batched_value(self):
        hs = [Tensor([[1.0, 2.0], [10.0, 20.0]]), Tensor([[3.0, 4.0], [30.0, 40.0]])]
        mask = np.array([[True, True], [True, False]])
        out = ad.mean_over_time(hs, mask)
        assert np.allclose(out.data, [[2.0, 3.0], [10.0, 20.0]])

    def test_batched_gradient(self):
        hs = [rand_tensor(RNG, 2, 3) for _ in range(4)]
        mask = np.array([[True, True, False, False], [True, True, True, True]])
        w = rand_tensor(RNG, 3)
        check_grads(lambda: ad.sum_all(ad.matmul(ad.mean_over_time(hs, mask), w)), hs, tol=1e-6)

    def test_all_padding_rejected(self):
        with pytest.raises(ValueError):
            ad.mean_over_time([rand_tensor(RNG, 2)], np.array([False]))


class TestL2Normalize:
    def test_unit_norm(self):
        out = ad.l2_normalize(Tensor([3.0, 4.0]))
        assert np.allclose(out.data, [0.6, 0.8])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            ad.l2_normalize(Tensor([0.0, 0.0]))

    def test_gradient_1d_and_rows(self):
        v = rand_tensor(RNG, 5, lo=0.3, hi=1.0)
        w = rand_tensor(RNG, 5)
        check_grads(lambda: ad.matmul(ad.l2_normalize(v), w), [v], tol=1e-5)
        m = rand_tensor(RNG, 3, 4, lo=0.3, hi=1.0)
        wm = rand_tensor(RNG, 4)
        check_grads(lambda: ad.sum_all(ad.matmul(ad.l2_normalize(m), wm)), [m], tol=1e-5)


class TestLstmCell:
    def test_zero_params_zero_state_gives_zero_output(self):
        params = ad.LstmParams(w_x=Tensor(np.zeros((3, 8))), w_h=Tensor(np.zeros((2, 8))),
                               bias=Tensor(np.zeros(8)))
        for x in ([1.0, -2.0, 0.5], [0.0, 0.0, 0.0]):
            h, c = ad.lstm_cell(Tensor(x), ad.zero_state(2), params)
            assert np.array_equal(h.data, np.zeros(2))
            assert np.array_equal(c.data, np.zeros(2))

    def test_shape_mismatch(self):
        params = ad.LstmParams(w_x=Tensor(np.zeros((3, 8))), w_h=Tensor(np.zeros((2, 8))),
                               bias=Tensor(np.zeros(8)))
        with pytest.raises(DimensionError):
            ad.lstm_cell(Tensor([1.0, 2.0]), ad.zero_state(2), params)

    def test_gradients_wrt_all_params(self):
        d, n = 3, 2
        params = ad.init_lstm_params(d, n, RNG)
        x = rand_tensor(RNG, d)
        h0, c0 = rand_tensor(RNG, n), rand_tensor(RNG, n)
        w = rand_tensor(RNG, n)

        def build():
            h, c = ad.lstm_cell(x, (h0, c0), params)
            return ad.matmul(ad.mul(h, c), w)

        check_grads(build, [params.w_x, params.w_h, params.bias, x, h0, c0], tol=1e-4)


class TestGraph:
    def test_backward_requires_scalar(self):
        with pytest.raises(ValueError):
            rand_tensor(RNG, 3).backward()

    def test_unused_node_gets_zero_gradient(self):
        a = rand_tensor(RNG, 3)
        unused = ad.relu(a)
        loss = ad.sum_all(ad.mul(a, a))
        loss.backward()
        assert unused.grad is None  # not part of the loss tape
        assert np.allclose(a.grad, 2 * a.data)

    def test_diamond_graph_accumulates_once(self):
        a = rand_tensor(RNG, 4)
        b = ad.scale(a, 2.0)
        loss = ad.sum_all(ad.add(b, b))
        loss.backward()
        assert np.allclose(a.grad, 4.0)

    def test_nan_rejected_at_op_boundary(self):
        with pytest.raises(ValueError, match="non-finite"):
            Tensor([np.nan, 1.0])

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(7)
            x = Tensor(rng.normal(size=(4, 4)))
            loss = ad.sum_all(ad.softmax(ad.matmul(x, ad.transpose(x))))
            loss.backward()
            return loss.item(), x.grad.copy()

        l1, g1 = run()
        l2, g2 = run()
        assert l1 == l2
        assert np.array_equal(g1, g2)
