import numpy as np
import pytest

from kgattn.autodiff import Tensor
from kgattn.errors import TrainingError
from kgattn.optim import Adam


def test_zero_gradient_leaves_parameters_unchanged():
    p = Tensor([1.0, -2.0, 3.0])
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.zeros(3)
    opt.step()
    assert np.array_equal(p.data, [1.0, -2.0, 3.0])


def test_first_step_moves_by_learning_rate():
    # bias correction makes the first update lr * g / (|g| + eps)
    p = Tensor([0.0])
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.array([1.0])
    opt.step()
    assert abs(p.data[0] + 0.1) < 1e-6


def test_constant_gradient_approaches_sign_descent():
    p = Tensor([0.0])
    opt = Adam({"p": p}, lr=0.1)
    deltas = []
    for _ in range(200):
        before = p.data.copy()
        p.grad = np.array([0.37])
        opt.step()
        deltas.append(abs(p.data[0] - before[0]))
    assert abs(deltas[-1] - 0.1) < 1e-3


def test_non_finite_gradient_names_parameter():
    p = Tensor([0.0])
    opt = Adam({"embedding_table": p}, lr=0.1)
    p.grad = np.array([np.inf])
    with pytest.raises(TrainingError, match="embedding_table"):
        opt.step()


def test_none_gradient_skipped_and_counter_increases():
    p, q = Tensor([1.0]), Tensor([1.0])
    opt = Adam({"p": p, "q": q}, lr=0.1)
    p.grad = np.array([1.0])
    q.grad = None
    opt.step()
    assert opt.step_count == 1
    assert p.data[0] != 1.0
    assert q.data[0] == 1.0
    opt.step()
    assert opt.step_count == 2


def test_moment_shapes_match_parameters():
    p = Tensor(np.zeros((3, 4)))
    opt = Adam({"p": p})
    assert opt._m["p"].shape == (3, 4)
    assert opt._v["p"].shape == (3, 4)
