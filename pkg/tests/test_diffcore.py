import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from knowtrace.diffcore import (
    OptimizerState,
    ParamRegistry,
    activate,
    activate_backward,
    affine,
    affine_backward,
    binary_cross_entropy,
    binary_cross_entropy_grad,
    clip_global_norm,
    finite_diff_gradcheck,
    global_norm,
    sgd_momentum_step,
    softmax,
    softmax_backward,
    softplus,
)

finite = st.floats(-30, 30, allow_nan=False, allow_infinity=False)


def test_affine_shape_error_names_both_shapes():
    with pytest.raises(ValueError) as exc:
        affine(np.ones((2, 3)), np.ones((4, 5)), np.zeros(5))
    assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)


def test_affine_backward_matches_numeric(rng):
    x, W, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=2)
    dy = rng.normal(size=(4, 2))
    dx, dW, db = affine_backward(dy, x, W)
    h = 1e-6
    for arr, grad in ((x, dx), (W, dW), (b, db)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = np.sum(dy * affine(x, W, b))
            arr[idx] = old - h
            dn = np.sum(dy * affine(x, W, b))
            arr[idx] = old
            assert abs((up - dn) / (2 * h) - grad[idx]) < 1e-7


@given(arrays(float, st.integers(1, 12), elements=finite))
def test_softmax_on_simplex(z):
    y = softmax(z)
    assert np.all(y >= 0)
    assert abs(y.sum() - 1) < 1e-12


def test_softmax_large_logits_stable():
    y = softmax(np.array([1000.0, 1000.0, -1000.0]))
    np.testing.assert_allclose(y, [0.5, 0.5, 0.0])


def test_softmax_rejects_nonfinite():
    with pytest.raises(ValueError):
        softmax(np.array([0.0, np.nan]))


def test_softmax_backward_jacobian(rng):
    z = rng.normal(size=5)
    y = softmax(z)
    J = np.diag(y) - np.outer(y, y)
    dy = rng.normal(size=5)
    np.testing.assert_allclose(softmax_backward(dy, y), J.T @ dy, atol=1e-14)


@pytest.mark.parametrize("kind", ["sigmoid", "tanh"])
def test_activation_backward(kind, rng):
    z = rng.normal(size=20)
    y = activate(kind, z)
    h = 1e-6
    num = (activate(kind, z + h) - activate(kind, z - h)) / (2 * h)
    np.testing.assert_allclose(activate_backward(kind, np.ones_like(z), y), num, rtol=1e-7)


def test_unknown_activation():
    with pytest.raises(ValueError):
        activate("relu", np.zeros(2))


def test_sigmoid_extremes_are_finite():
    y = activate("sigmoid", np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(y)) and y[0] == 0.0 and y[1] == 1.0


def test_softplus_positive_and_stable():
    z = np.array([-50.0, 0.0, 50.0, 800.0])
    s = softplus(z)
    assert np.all(s > 0)
    assert s[1] == pytest.approx(np.log(2))
    assert s[3] == pytest.approx(800.0)


def test_bce_values_and_clamp():
    assert binary_cross_entropy(0.5, 1) == pytest.approx(np.log(2))
    # p = 0 with r = 1 hits the clamp, not infinity
    assert binary_cross_entropy(0.0, 1) == pytest.approx(-np.log(1e-8))
    with pytest.raises(ValueError):
        binary_cross_entropy(0.5, 0.3)


def test_bce_grad_zero_in_clamp_region():
    g = binary_cross_entropy_grad(np.array([0.0, 1.0, 0.3]), np.array([1, 0, 1]))
    assert g[0] == 0.0 and g[1] == 0.0
    assert g[2] == pytest.approx(-1 / 0.3)


def test_registry_bookkeeping():
    reg = ParamRegistry()
    reg.add("W", np.ones((2, 3)))
    reg.add("b", np.zeros(3))
    assert reg.names() == ["W", "b"]
    assert reg.num_params() == 9
    with pytest.raises(KeyError):
        reg.add("W", np.ones(1))
    with pytest.raises(ValueError):
        reg.set_grads({"b": np.ones(4)})
    c = reg.copy()
    assert c == reg
    c["W"][0, 0] = 5
    assert c != reg


def test_clip_global_norm():
    g = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
    out = clip_global_norm(g, 1.0)
    assert global_norm(out) == pytest.approx(1.0)
    np.testing.assert_allclose(out["a"], [0.6, 0.0])
    same = clip_global_norm(g, 50.0)
    assert global_norm(same) == pytest.approx(5.0)
    assert same["a"] is not g["a"]


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(0.1, 100))
def test_clip_never_exceeds_threshold(values, thr):
    out = clip_global_norm({"g": np.array(values)}, thr)
    assert global_norm(out) <= thr * (1 + 1e-12)


def test_sgd_momentum_two_steps():
    reg = ParamRegistry({"w": np.array([1.0])})
    st_ = OptimizerState(momentum=0.9)
    reg.set_grads({"w": np.array([1.0])})
    sgd_momentum_step(reg, st_, 0.1)
    assert reg["w"][0] == pytest.approx(0.9)
    assert reg.grad("w")[0] == 0.0
    reg.set_grads({"w": np.array([1.0])})
    sgd_momentum_step(reg, st_, 0.1)
    # v = 0.9*1 + 1 = 1.9
    assert reg["w"][0] == pytest.approx(0.9 - 0.19)


def test_sgd_zero_lr_is_bitwise_noop(rng):
    w0 = rng.normal(size=(3, 3))
    reg = ParamRegistry({"w": w0})
    st_ = OptimizerState()
    for _ in range(5):
        reg.set_grads({"w": rng.normal(size=(3, 3))})
        sgd_momentum_step(reg, st_, 0.0)
    assert np.array_equal(reg["w"], w0)


def test_optimizer_state_validation():
    with pytest.raises(ValueError):
        OptimizerState(momentum=1.0)
    with pytest.raises(ValueError):
        OptimizerState(clip=0)


def _quadratic(reg):
    x = reg["x"]
    return float(np.sum(x**3)), {"x": 3 * x**2}


def test_gradcheck_passes_correct_and_flags_wrong(rng):
    reg = ParamRegistry({"x": rng.normal(size=6)})
    assert finite_diff_gradcheck(_quadratic, reg).passed(1e-6)
    bad = lambda r: (_quadratic(r)[0], {"x": 2 * r["x"] ** 2})
    assert not finite_diff_gradcheck(bad, reg).passed(1e-4)


def test_gradcheck_rejects_nondeterministic_loss():
    reg = ParamRegistry({"x": np.ones(2)})
    calls = iter(range(100))
    with pytest.raises(ValueError):
        finite_diff_gradcheck(lambda r: (float(next(calls)), {"x": np.zeros(2)}), reg)


def test_gradcheck_restores_parameters(rng):
    x = rng.normal(size=5)
    reg = ParamRegistry({"x": x})
    finite_diff_gradcheck(_quadratic, reg)
    assert np.array_equal(reg["x"], x)
