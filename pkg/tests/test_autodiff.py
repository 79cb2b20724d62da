"""Per-operation gradient checks against central finite differences,
plus the contracts of the backward pass itself."""

import numpy as np
import pytest

from gradcheck import finite_difference, relative_error
from hyphin import numkern as nk
from hyphin.errors import ContractError, DimensionError

OP_TOL = 1e-5


def _away_from_kinks(rng, shape, low=0.2, high=1.7):
    """Magnitudes bounded away from 0 so kinked nonlinearities stay smooth."""
    mag = rng.uniform(low, high, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return mag * sign


def _check(build, arrays, tol=OP_TOL):
    tensors = {name: nk.parameter(a, name=name) for name, a in arrays.items()}
    loss = build(tensors)
    grads = nk.backward(loss, list(tensors.values()))
    for name, t in tensors.items():
        numeric = finite_difference(lambda: float(build(tensors).value), arrays[name])
        err = relative_error(grads[t], numeric)
        assert err < tol, f"{name}: rel err {err}"


def test_grad_add_broadcast():
    rng = np.random.default_rng(10)
    arrays = {"a": rng.standard_normal((3, 4)), "b": rng.standard_normal((1, 4))}
    w = rng.standard_normal((3, 4))
    _check(lambda t: nk.sum_(nk.mul(nk.add(t["a"], t["b"]), nk.constant(w))), arrays)


def test_grad_sub_and_scalar_broadcast():
    rng = np.random.default_rng(11)
    arrays = {"a": rng.standard_normal((2, 3)), "b": rng.standard_normal(())}
    w = rng.standard_normal((2, 3))
    _check(lambda t: nk.sum_(nk.mul(nk.sub(t["a"], t["b"]), nk.constant(w))), arrays)


def test_grad_mul_div():
    rng = np.random.default_rng(12)
    arrays = {
        "a": rng.standard_normal((4, 2)),
        "b": rng.uniform(0.5, 2.0, (4, 2)),
        "c": rng.uniform(0.5, 2.0, (4, 1)),
    }
    _check(lambda t: nk.sum_(nk.div(nk.mul(t["a"], t["b"]), t["c"])), arrays)


def test_grad_power_exp_log():
    rng = np.random.default_rng(13)
    arrays = {"a": rng.uniform(0.3, 2.0, (3, 3))}
    _check(
        lambda t: nk.sum_(nk.add(nk.power(t["a"], 1.7), nk.log(nk.exp(t["a"])))),
        arrays,
    )


def test_grad_reciprocal_power():
    rng = np.random.default_rng(14)
    arrays = {"a": rng.uniform(0.5, 3.0, (5,))}
    _check(lambda t: nk.sum_(nk.power(t["a"], -1.0)), arrays)


def test_grad_tanh_elu_leaky_relu():
    rng = np.random.default_rng(15)
    arrays = {"a": _away_from_kinks(rng, (4, 4))}
    w = rng.standard_normal((4, 4))

    def build(t):
        mix = nk.add(nk.tanh(t["a"]), nk.add(nk.elu(t["a"]), nk.leaky_relu(t["a"])))
        return nk.sum_(nk.mul(mix, nk.constant(w)))

    _check(build, arrays)


def test_grad_matmul_both_arities():
    rng = np.random.default_rng(16)
    arrays = {
        "a": rng.standard_normal((3, 4)),
        "b": rng.standard_normal((4, 2)),
        "v": rng.standard_normal(2),
    }
    _check(lambda t: nk.sum_(nk.matmul(nk.matmul(t["a"], t["b"]), t["v"])), arrays)


def test_grad_transpose_reshape():
    rng = np.random.default_rng(17)
    arrays = {"a": rng.standard_normal((3, 4))}
    w = rng.standard_normal((2, 6))
    _check(
        lambda t: nk.sum_(
            nk.mul(nk.reshape(nk.transpose(t["a"]), (2, 6)), nk.constant(w))
        ),
        arrays,
    )


def test_grad_sum_mean_axes():
    rng = np.random.default_rng(18)
    arrays = {"a": rng.standard_normal((4, 5))}
    w0 = rng.standard_normal((1, 5))
    w1 = rng.standard_normal((4,))

    def build(t):
        part0 = nk.sum_(nk.mul(nk.sum_(t["a"], axis=0, keepdims=True), nk.constant(w0)))
        part1 = nk.sum_(nk.mul(nk.mean_(t["a"], axis=1), nk.constant(w1)))
        return nk.add(part0, part1)

    _check(build, arrays)


def test_grad_slice_pick_stack():
    rng = np.random.default_rng(19)
    arrays = {"a": rng.standard_normal(6)}

    def build(t):
        head = nk.sum_(nk.slice1d(t["a"], 0, 3))
        tail = nk.pick(t["a"], 5)
        return nk.sum_(nk.mul(nk.stack1d([head, tail]), nk.constant(np.array([1.3, -0.7]))))

    _check(build, arrays)


def test_grad_masked_row_softmax():
    rng = np.random.default_rng(20)
    arrays = {"a": rng.standard_normal((4, 5))}
    mask = rng.random((4, 5)) < 0.6
    mask[:, 0] = True
    w = rng.standard_normal((4, 5))
    _check(
        lambda t: nk.sum_(nk.mul(nk.masked_row_softmax(t["a"], mask), nk.constant(w))),
        arrays,
    )


def test_grad_masked_row_logsumexp():
    rng = np.random.default_rng(21)
    arrays = {"a": rng.standard_normal((5, 4))}
    mask = rng.random((5, 4)) < 0.5
    mask[:, 1] = True
    w = rng.standard_normal(5)
    _check(
        lambda t: nk.sum_(
            nk.mul(nk.masked_row_logsumexp(t["a"], mask), nk.constant(w))
        ),
        arrays,
    )


def test_logsumexp_empty_mask_row_is_rejected():
    mask = np.zeros((2, 3), dtype=bool)
    mask[0] = True
    with pytest.raises(ContractError, match="row 1"):
        nk.masked_row_logsumexp(nk.constant(np.zeros((2, 3))), mask)


def test_grad_row_blend():
    rng = np.random.default_rng(22)
    arrays = {"a": rng.standard_normal((4, 3)), "b": rng.standard_normal((4, 3))}
    keep = np.array([True, False, True, False])
    w = rng.standard_normal((4, 3))
    _check(
        lambda t: nk.sum_(nk.mul(nk.row_blend(keep, t["a"], t["b"]), nk.constant(w))),
        arrays,
    )


def test_grad_composed_pipeline_tight():
    # a deeper composition exercising re-use of intermediate nodes
    rng = np.random.default_rng(23)
    arrays = {
        "x": rng.standard_normal((5, 3)),
        "w": rng.standard_normal((3, 3)),
        "v": rng.standard_normal(3),
    }

    def build(t):
        hidden = nk.tanh(nk.matmul(t["x"], t["w"]))
        scores = nk.matmul(hidden, t["v"])
        attn = nk.masked_row_softmax(
            nk.reshape(scores, (1, 5)), np.ones((1, 5), dtype=bool)
        )
        pooled = nk.matmul(nk.reshape(attn, (1, 5)), hidden)
        return nk.sum_(nk.mul(pooled, pooled))

    _check(build, arrays, tol=1e-4)


def test_backward_requires_scalar_output():
    a = nk.parameter(np.ones((2, 2)))
    with pytest.raises(ContractError):
        nk.backward(nk.mul(a, a))


def test_backward_zero_gradient_for_unreachable_trainable():
    a = nk.parameter(np.array([1.0, 2.0]))
    unused = nk.parameter(np.ones((3, 2)))
    loss = nk.sum_(nk.mul(a, a))
    grads = nk.backward(loss, [a, unused])
    assert np.allclose(grads[a], 2.0 * a.value)
    assert grads[unused].shape == (3, 2)
    assert np.all(grads[unused] == 0.0)


def test_backward_accumulates_reused_tensor():
    a = nk.parameter(np.array([3.0, -1.0]))
    loss = nk.sum_(nk.add(nk.mul(a, a), a))  # d/da (a^2 + a) = 2a + 1
    grads = nk.backward(loss, [a])
    assert np.allclose(grads[a], 2.0 * a.value + 1.0)


def test_backward_is_bitwise_repeatable():
    rng = np.random.default_rng(24)
    x = rng.standard_normal((6, 4))

    def run():
        a = nk.parameter(x.copy())
        b = nk.parameter(np.ones(4))
        loss = nk.sum_(nk.mul(nk.tanh(nk.matmul(a, b)), nk.constant(np.arange(6.0))))
        grads = nk.backward(loss, [a, b])
        return grads[a].tobytes() + grads[b].tobytes()

    assert run() == run()


def test_matmul_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        nk.matmul(nk.constant(np.zeros((2, 3))), nk.constant(np.zeros((2, 3))))
    with pytest.raises(DimensionError):
        nk.matmul(nk.constant(np.zeros(3)), nk.constant(np.zeros((3, 2))))


def test_operator_sugar_matches_functions():
    a = nk.parameter(np.array([2.0, 3.0]))
    b = nk.parameter(np.array([4.0, 5.0]))
    assert np.allclose((a + b).value, [6.0, 8.0])
    assert np.allclose((a - b).value, [-2.0, -2.0])
    assert np.allclose((a * b).value, [8.0, 15.0])
    assert np.allclose((a / b).value, [0.5, 0.6])
    assert np.allclose((a**2).value, [4.0, 9.0])
    assert np.allclose((-a).value, [-2.0, -3.0])
    assert np.allclose((1.0 + a).value, [3.0, 4.0])
