import math

import numpy as np
import pytest

from damagenet.errors import ShapeError
from damagenet.layers import softmax
from damagenet.optim import SgdMomentum, cross_entropy, loss_gradient_at_logits
from damagenet.tensor import Tensor

from conftest import assert_rel_close, central_difference


def probs_tensor(rows, dtype=np.float64):
    return Tensor(np.asarray(rows, dtype=dtype))


class TestCrossEntropy:
    def test_perfect_one_hot(self):
        probs = probs_tensor([[1, 0, 0, 0], [0, 0, 1, 0]])
        report = cross_entropy(probs, [0, 2])
        assert report.loss == 0.0
        assert report.correct_count == 2
        assert report.accuracy == 1.0

    def test_uniform_rows_give_ln4(self):
        probs = probs_tensor([[0.25] * 4] * 5)
        report = cross_entropy(probs, [0, 1, 2, 3, 0])
        assert math.isclose(report.loss, math.log(4), rel_tol=1e-12)

    def test_single_confident_row(self):
        report = cross_entropy(probs_tensor([[0.7, 0.1, 0.1, 0.1]]), [0])
        assert math.isclose(report.loss, -math.log(0.7), rel_tol=1e-12)
        assert math.isclose(report.loss, 0.3567, abs_tol=1e-4)

    def test_clamp_keeps_loss_finite(self):
        report = cross_entropy(probs_tensor([[1.0, 0.0, 0.0, 0.0]]), [3])
        assert np.isfinite(report.loss)
        assert report.correct_count == 0

    def test_accuracy_tie_breaks_to_lowest_index(self):
        probs = probs_tensor([[0.25] * 4])
        assert cross_entropy(probs, [0]).correct_count == 1
        assert cross_entropy(probs, [1]).correct_count == 0

    def test_label_out_of_range(self):
        with pytest.raises(ShapeError):
            cross_entropy(probs_tensor([[0.25] * 4]), [4])
        with pytest.raises(ShapeError):
            cross_entropy(probs_tensor([[0.25] * 4]), [-1])

    def test_malformed_rows_rejected(self):
        with pytest.raises(ShapeError):
            cross_entropy(probs_tensor([[0.5, 0.5, 0.5, 0.5]]), [0])

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        raw = softmax(Tensor(rng.normal(size=(6, 4)))).data
        labels = rng.integers(0, 4, size=6)
        base = cross_entropy(Tensor(raw), labels).loss
        perm = rng.permutation(4)
        permuted = cross_entropy(Tensor(raw[:, perm]),
                                 [int(np.where(perm == l)[0][0]) for l in labels]).loss
        assert math.isclose(base, permuted, rel_tol=1e-12)


class TestLossGradient:
    def test_one_hot_prediction_gives_zero(self):
        grad = loss_gradient_at_logits(probs_tensor([[0, 1, 0, 0]]), [1])
        assert not grad.data.any()

    def test_uniform_single_row(self):
        grad = loss_gradient_at_logits(probs_tensor([[0.25] * 4]), [0])
        np.testing.assert_allclose(grad.data[0], [-0.75, 0.25, 0.25, 0.25], atol=1e-12)

    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(6)
        probs = softmax(Tensor(rng.normal(size=(8, 4))))
        grad = loss_gradient_at_logits(probs, rng.integers(0, 4, size=8))
        np.testing.assert_allclose(grad.data.sum(axis=1), 0.0, atol=1e-7)

    def test_matches_finite_differences_through_softmax(self):
        rng = np.random.default_rng(7)
        logits = rng.normal(size=(3, 4))
        labels = np.array([2, 0, 1])
        grad = loss_gradient_at_logits(softmax(Tensor(logits)), labels)

        def loss():
            return cross_entropy(softmax(Tensor(logits)), labels).loss

        assert_rel_close(grad.data, central_difference(loss, logits))


class TestSgdMomentum:
    def test_two_step_hand_trace(self):
        w = Tensor.create([1], [1.0], dtype=np.float64)
        g = Tensor.create([1], [1.0], dtype=np.float64)
        opt = SgdMomentum(learning_rate=0.1, momentum=0.9)
        opt.step({"w": w}, {"w": g})
        assert abs(w.at(0) - 0.9) < 1e-12
        assert abs(opt.velocities["w"][0] + 0.1) < 1e-12
        opt.step({"w": w}, {"w": g})
        assert abs(w.at(0) - 0.71) < 1e-12
        assert abs(opt.velocities["w"][0] + 0.19) < 1e-12

    def test_zero_momentum_is_plain_sgd_bitwise(self):
        rng = np.random.default_rng(8)
        values = rng.normal(size=(5, 3)).astype(np.float32)
        grads = rng.normal(size=(5, 3)).astype(np.float32)
        lr = 0.037
        w = Tensor(values.copy())
        SgdMomentum(lr, momentum=0.0).step({"w": w}, {"w": Tensor(grads)})
        expected = values.copy()
        expected += -(lr * grads)
        np.testing.assert_array_equal(w.data, expected)

    def test_velocity_decays_to_zero_without_gradient(self):
        w = Tensor.create([1], [1.0], dtype=np.float64)
        opt = SgdMomentum(0.1, 0.9)
        opt.step({"w": w}, {"w": Tensor.create([1], [1.0], np.float64)})
        zero = Tensor.create([1], [0.0], dtype=np.float64)
        for _ in range(200):
            opt.step({"w": w}, {"w": zero})
        assert abs(opt.velocities["w"][0]) < 1e-10
        # w converged geometrically to its fixed point, 1 - 0.1/(1-0.9).
        assert abs(w.at(0) - (1.0 - 1.0)) < 1e-9

    def test_step_decreases_quadratic_loss(self):
        w = Tensor.create([1], [1.0], dtype=np.float64)
        opt = SgdMomentum(0.05, 0.9)
        before = 0.5 * w.at(0) ** 2
        opt.step({"w": w}, {"w": Tensor.create([1], [w.at(0)], np.float64)})
        after = 0.5 * w.at(0) ** 2
        assert after < before

    def test_never_touches_parameters_without_gradients(self):
        frozen = Tensor.create([2], [5.0, 6.0], dtype=np.float64)
        live = Tensor.create([2], [1.0, 1.0], dtype=np.float64)
        params = {"frozen": frozen, "live": live}
        SgdMomentum(0.1, 0.9).step(params, {"live": Tensor.create([2], 1.0, np.float64)})
        assert frozen.tolist() == [5.0, 6.0]
        assert live.tolist() != [1.0, 1.0]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            SgdMomentum(0.1).step({"w": Tensor.create([2], 1.0)},
                                  {"w": Tensor.create([3], 1.0)})

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ShapeError):
            SgdMomentum(0.1).step({}, {"ghost": Tensor.create([1], 1.0)})

    @pytest.mark.parametrize("lr,mu", [(0.0, 0.5), (-1.0, 0.5), (0.1, 1.0), (0.1, -0.1)])
    def test_hyperparameter_validation(self, lr, mu):
        with pytest.raises(ValueError):
            SgdMomentum(lr, mu)
