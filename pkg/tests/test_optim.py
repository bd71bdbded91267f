import numpy as np
import pytest

from ctnas.optim import adam_step, init_adam
from ctnas.tensor import Tensor


def test_zero_grad_zero_decay_leaves_params():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    state = init_adam([p], lr=0.1, weight_decay=0.0)
    adam_step([p], [np.zeros(2)], state)
    np.testing.assert_allclose(p.data, [1.0, -2.0])
    assert state.t == 1


def test_single_step_on_identity_loss():
    # f(w) = w, grad 1, from w=0 with lr 0.1: bias-corrected Adam moves -0.1
    p = Tensor(np.array([0.0]), requires_grad=True)
    state = init_adam([p], lr=0.1, weight_decay=0.0)
    adam_step([p], [np.array([1.0])], state)
    assert p.data[0] == pytest.approx(-0.1, abs=1e-7)


def test_deterministic_repeat():
    def run():
        p = Tensor(np.array([0.5, 1.5]), requires_grad=True)
        state = init_adam([p], lr=0.01, weight_decay=5e-4)
        for t in range(10):
            adam_step([p], [np.array([0.1 * t, -0.2])], state)
        return p.data.copy()

    np.testing.assert_array_equal(run(), run())


def test_decoupled_decay_shrinks_without_grads():
    p = Tensor(np.array([10.0]), requires_grad=True)
    state = init_adam([p], lr=0.1, weight_decay=0.5)
    adam_step([p], [None], state)
    # only the decay term: 10 - 0.1*0.5*10
    assert p.data[0] == pytest.approx(9.5)


def test_reads_tensor_grads_when_grads_none():
    p = Tensor(np.array([0.0]), requires_grad=True)
    (p * 3.0).sum().backward()
    state = init_adam([p], lr=0.1, weight_decay=0.0)
    adam_step([p], None, state)
    assert p.data[0] == pytest.approx(-0.1, abs=1e-7)
    assert p.grad is None  # consumed


def test_shape_mismatch_rejected():
    p = Tensor(np.zeros(3), requires_grad=True)
    state = init_adam([p])
    with pytest.raises(ValueError):
        adam_step([p], [np.zeros(2)], state)


def test_converges_on_quadratic():
    p = Tensor(np.array([5.0]), requires_grad=True)
    state = init_adam([p], lr=0.05, weight_decay=0.0)
    for _ in range(2000):
        g = 2.0 * (p.data - 3.0)
        adam_step([p], [g], state)
    assert p.data[0] == pytest.approx(3.0, abs=1e-3)
