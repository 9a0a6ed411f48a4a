import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from vmtunet.core.autodiff import (
    Adam,
    AdamState,
    BatchNormState,
    Param,
    Tape,
    Tensor,
    adam_step,
    add,
    batch_norm_2d,
    bce,
    check_gradients,
    concat_channels,
    conv2d,
    current_tape,
    double_well_prime_node,
    fdm_laplacian_node,
    hinge,
    l2,
    load_checkpoint,
    load_into,
    maxpool2,
    mul,
    relu,
    save_checkpoint,
    scale_shift,
    sigmoid,
    square,
    stack_batch,
    sub,
    sum_all,
    tfpm_laplacian_node,
    upsample_nearest2,
)
from vmtunet.core.discretization.schemes import sech2_quarter, tfpm_lambda_c0, tfpm_laplacian_array
from vmtunet.core.errors import DecodeError, IoError, ShapeMismatch
from vmtunet.core.field.field import LaplacianKernel
from vmtunet.core.models.models import BoundaryKind, PaddingKind

GRAD_TOL = 1e-4


def leaf(data, name):
    return Tensor(data, requires_grad=True, name=name)


def assert_gradients(loss_fn, tensors):
    errors = check_gradients(loss_fn, tensors)
    assert max(errors.values()) <= GRAD_TOL, errors


# tape


def test_ops_outside_a_tape_do_not_record():
    x = leaf(np.ones((1, 1, 2, 2)), "x")
    y = sigmoid(x)
    assert current_tape() is None
    assert y.is_leaf
    with Tape() as tape:
        z = sigmoid(x)
        assert current_tape() is tape
    assert not z.is_leaf
    assert len(tape.nodes) == 1
    assert current_tape() is None


def test_constants_are_not_recorded():
    with Tape() as tape:
        sigmoid(Tensor(np.zeros((1, 1, 2, 2))))
    assert tape.nodes == []


def test_backward_accumulates_into_leaves():
    x = leaf(np.array([1.0, 2.0]), "x")
    with Tape() as tape:
        y = sum_all(add(square(x), x))
    tape.backward(y)
    assert_allclose(x.grad, 2 * x.data + 1)
    with Tape() as tape:
        y = sum_all(x)
    tape.backward(y)
    assert_allclose(x.grad, 2 * x.data + 2)


def test_backward_is_linear_in_the_cotangent(rng):
    x = leaf(rng.normal(size=(1, 2, 4, 4)), "x")
    w = leaf(rng.normal(size=(3, 2, 3, 3)), "w")
    with Tape() as tape:
        out = sigmoid(conv2d(x, w))
    cot = rng.normal(size=out.shape)
    tape.backward(out, cot)
    base = tape.grad(w).copy()
    tape.backward(out, 2.5 * cot)
    assert_allclose(tape.grad(w), 2.5 * base, rtol=1e-10)


def test_cotangent_shape_is_checked():
    x = leaf(np.ones(3), "x")
    with Tape() as tape:
        y = square(x)
    with pytest.raises(ShapeMismatch):
        tape.backward(y, np.ones(4))


def test_replay_is_bit_identical(rng):
    data = rng.normal(size=(2, 1, 4, 4))
    weights = rng.normal(size=(2, 1, 3, 3))

    def run():
        w = Param("w", weights)
        with Tape() as tape:
            loss = sum_all(square(relu(conv2d(Tensor(data), w))))
        tape.backward(loss)
        return loss.item(), w.grad

    (l1, g1), (l2_, g2) = run(), run()
    assert l1 == l2_
    assert_array_equal(g1, g2)


# convolution


def test_conv_identity_kernel(rng):
    x = Tensor(rng.normal(size=(2, 1, 5, 5)))
    out = conv2d(x, Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros(1)))
    assert_array_equal(out.data, x.data)


def test_conv_laplacian_kernel_on_constant():
    w = Tensor(LaplacianKernel().taps[None, None])
    out = conv2d(Tensor(np.full((1, 1, 6, 6), 3.0)), w, padding=PaddingKind.REFLECT)
    assert np.all(out.data == 0.0)


def test_conv_shape_checks():
    with pytest.raises(ShapeMismatch):
        conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))
    with pytest.raises(ShapeMismatch):
        conv2d(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 2, 2))))


@pytest.mark.parametrize("padding", list(PaddingKind))
def test_conv_gradients(rng, padding):
    x = leaf(rng.normal(size=(1, 2, 6, 6)), "x")
    w = leaf(rng.normal(size=(3, 2, 3, 3)), "w")
    b = leaf(rng.normal(size=3), "b")
    assert_gradients(lambda: sum_all(square(conv2d(x, w, b, padding=padding))), [x, w, b])


def test_strided_conv_gradients(rng):
    x = leaf(rng.normal(size=(2, 1, 7, 7)), "x")
    w = leaf(rng.normal(size=(2, 1, 3, 3)), "w")
    out = conv2d(x, w, stride=2)
    assert out.shape == (2, 2, 4, 4)
    assert_gradients(lambda: sum_all(square(conv2d(x, w, stride=2))), [x, w])


# pointwise


def test_pointwise_values():
    assert sigmoid(Tensor(np.zeros(1))).data[0] == 0.5
    assert_array_equal(relu(Tensor(np.array([-3.0, 2.0]))).data, [0.0, 2.0])
    assert_array_equal(scale_shift(Tensor(np.array([1.0, 2.0])), 2.0, -1.0).data, [1.0, 3.0])


@pytest.mark.parametrize("shape", [(3,), (2, 3), (1, 2, 3, 3)])
def test_pointwise_gradients(rng, shape):
    a = leaf(rng.normal(size=shape), "a")
    b = leaf(rng.normal(size=shape), "b")

    def loss():
        mixed = mul(sub(sigmoid(a), relu(b)), add(a, square(b)))
        return sum_all(double_well_prime_node(mixed))

    assert_gradients(loss, [a, b])


def test_binary_ops_check_shapes():
    with pytest.raises(ShapeMismatch):
        add(Tensor(np.zeros(2)), Tensor(np.zeros(3)))


# batch norm


def test_batch_norm_is_identity_on_normalized_batch(rng):
    x = rng.normal(size=(4, 3, 5, 5))
    x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
    out = batch_norm_2d(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), eps_bn=1e-10)
    assert_allclose(out.data, x, atol=1e-6)


def test_batch_norm_gradients(rng):
    x = leaf(rng.normal(size=(2, 2, 3, 3)), "x")
    gamma = leaf(rng.normal(size=2), "gamma")
    beta = leaf(rng.normal(size=2), "beta")
    weights = rng.normal(size=(2, 2, 3, 3))

    def loss():
        return sum_all(mul(batch_norm_2d(x, gamma, beta), Tensor(weights)))

    assert_gradients(loss, [x, gamma, beta])


def test_batch_norm_running_statistics(rng):
    state = BatchNormState(2)
    x = rng.normal(loc=3.0, size=(4, 2, 3, 3))
    gamma, beta = Tensor(np.ones(2)), Tensor(np.zeros(2))
    batch_norm_2d(Tensor(x), gamma, beta, state, training=True)
    assert_allclose(state.mean, 0.1 * x.mean(axis=(0, 2, 3)))
    assert_allclose(state.var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)))

    before = (state.mean.copy(), state.var.copy())
    out = batch_norm_2d(Tensor(x), gamma, beta, state, training=False)
    assert_array_equal(state.mean, before[0])
    expected = (x - before[0][None, :, None, None]) / np.sqrt(before[1] + 1e-5)[None, :, None, None]
    assert_allclose(out.data, expected)


def test_batch_norm_eval_gradients(rng):
    state = BatchNormState(2, mean=rng.normal(size=2), var=rng.uniform(0.5, 2.0, size=2))
    x = leaf(rng.normal(size=(1, 2, 3, 3)), "x")
    gamma = leaf(rng.normal(size=2), "gamma")
    beta = leaf(rng.normal(size=2), "beta")

    def loss():
        return sum_all(square(batch_norm_2d(x, gamma, beta, state, training=False)))

    assert_gradients(loss, [x, gamma, beta])


# resampling


def test_maxpool_and_upsample_values(rng):
    out = maxpool2(Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]])))
    assert out.data.item() == 4.0
    x = Tensor(rng.normal(size=(2, 3, 4, 6)))
    assert_array_equal(maxpool2(upsample_nearest2(x)).data, x.data)
    with pytest.raises(ShapeMismatch):
        maxpool2(Tensor(np.zeros((1, 1, 3, 4))))


def test_resampling_gradients(rng):
    x = leaf(rng.normal(size=(1, 2, 4, 4)), "x")
    w = Tensor(rng.normal(size=(1, 2, 8, 8)))
    assert_gradients(lambda: sum_all(mul(upsample_nearest2(x), w)), [x])
    assert_gradients(lambda: sum_all(square(maxpool2(x))), [x])


def test_concat_gradients_split_back(rng):
    a = leaf(rng.normal(size=(1, 1, 3, 3)), "a")
    b = leaf(rng.normal(size=(1, 2, 3, 3)), "b")
    w = Tensor(rng.normal(size=(1, 3, 3, 3)))
    with Tape() as tape:
        loss = sum_all(mul(concat_channels(a, b), w))
    tape.backward(loss)
    assert_array_equal(a.grad, w.data[:, :1])
    assert_array_equal(b.grad, w.data[:, 1:])
    assert_gradients(lambda: sum_all(square(concat_channels(a, b))), [a, b])


def test_stack_batch():
    batch = stack_batch([np.zeros((1, 4, 4)), np.ones((1, 1, 4, 4))])
    assert batch.shape == (2, 1, 4, 4)


# laplacian nodes


@pytest.mark.parametrize("bc", list(BoundaryKind))
def test_tfpm_node_matches_solver_stencil(rng, bc):
    u = rng.random((1, 1, 6, 6))
    out = tfpm_laplacian_node(Tensor(u), 1.3, 0.7, 0.5, bc)
    assert_array_equal(out.data[0, 0], tfpm_laplacian_array(u[0, 0], 1.3, 0.7, 0.5, bc))


def test_tfpm_node_on_zero_input():
    u = leaf(np.zeros((1, 1, 5, 5)), "u")
    with Tape() as tape:
        out = tfpm_laplacian_node(u, 1.0, 1.0, 1.0, BoundaryKind.NEUMANN)
    assert np.all(out.data == 0.0)
    tape.backward(out)
    assert np.all(np.isfinite(u.grad))
    assert_gradients(lambda: sum_all(tfpm_laplacian_node(u, 1.0, 1.0, 1.0, BoundaryKind.NEUMANN)), [u])


@pytest.mark.parametrize("bc", list(BoundaryKind))
@pytest.mark.parametrize("h", [1.0, 0.5])
def test_laplacian_node_gradients(rng, bc, h):
    u = leaf(rng.random((1, 1, 5, 5)), "u")
    weights = Tensor(rng.normal(size=(1, 1, 5, 5)))
    assert_gradients(
        lambda: sum_all(mul(tfpm_laplacian_node(u, 1.0, 2.0, h, bc), weights)), [u]
    )
    assert_gradients(lambda: sum_all(mul(fdm_laplacian_node(u, h, bc), weights)), [u])


def test_frozen_center_keeps_only_the_neighbor_path(rng):
    u = leaf(rng.random((1, 1, 5, 5)), "u")
    weights = rng.normal(size=(1, 1, 5, 5))
    with Tape() as tape:
        out = tfpm_laplacian_node(u, 1.0, 1.0, 1.0, BoundaryKind.PERIODIC, freeze_center=True)
    tape.backward(out, weights)
    frozen = tape.grad(u).copy()
    with Tape() as tape:
        out = tfpm_laplacian_node(u, 1.0, 1.0, 1.0, BoundaryKind.PERIODIC)
    tape.backward(out, weights)
    assert not np.allclose(frozen, tape.grad(u))

    # neighbor-only path: lambda and c0 held at their current values
    lam, _ = tfpm_lambda_c0(u.data, 1.0, 1.0)
    coef = weights * lam**2 * sech2_quarter(0.5 * lam)
    expected = sum(np.roll(coef, s, axis=a) for s in (1, -1) for a in (2, 3))
    assert_allclose(frozen, expected, rtol=1e-9)


def test_fdm_node_periodic_sum_has_zero_gradient(rng):
    v = leaf(rng.random((1, 1, 6, 6)), "v")
    with Tape() as tape:
        loss = sum_all(fdm_laplacian_node(v, 1.0, BoundaryKind.PERIODIC))
    tape.backward(loss)
    assert_allclose(v.grad, 0.0, atol=1e-12)


# losses


def test_loss_values():
    t = np.array([0.0, 1.0])
    assert bce(Tensor(t), t).item() <= 1e-6
    x = Tensor(np.array([0.2, 0.7]))
    assert l2(x, x).item() == 0.0
    assert bce(Tensor(np.array([0.5])), np.array([1.0])).item() == pytest.approx(np.log(2.0))
    assert hinge(Tensor(np.array([1.0, 0.0])), np.array([1.0, 0.0])).item() == 0.0
    assert hinge(Tensor(np.array([0.5])), np.array([1.0])).item() == pytest.approx(1.0)


def test_loss_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        l2(Tensor(np.zeros(3)), np.zeros(4))


@pytest.mark.parametrize("loss", [bce, l2, hinge])
def test_loss_gradients(rng, loss):
    p = leaf(rng.uniform(0.1, 0.9, size=(1, 1, 4, 4)), "p")
    t = (rng.random((1, 1, 4, 4)) > 0.5).astype(float)
    assert_gradients(lambda: loss(p, t), [p])


def test_bce_clamp_blocks_gradient():
    p = leaf(np.array([0.0, 0.5]), "p")
    with Tape() as tape:
        loss = bce(p, np.array([1.0, 1.0]))
    tape.backward(loss)
    assert np.isfinite(loss.item())
    assert p.grad[0] == 0.0
    assert p.grad[1] == pytest.approx(-1.0)


# optimizer


def test_adam_zero_gradient():
    params = {"w": np.array([1.0, -2.0])}
    updated, state = adam_step(params, {"w": np.zeros(2)}, AdamState(), lr=0.1)
    assert_array_equal(updated["w"], params["w"])

    warm = AdamState(t=1, m={"w": np.ones(2)}, v={"w": np.ones(2)})
    _, decayed = adam_step(params, {"w": np.zeros(2)}, warm, lr=0.1)
    assert_allclose(decayed.m["w"], 0.9)
    assert_allclose(decayed.v["w"], 0.999)
    assert decayed.t == 2


def test_adam_first_step_moves_by_lr(rng):
    g = rng.normal(size=10) * 5
    updated, _ = adam_step({"w": np.zeros(10)}, {"w": g}, AdamState(), lr=0.01)
    step = np.abs(updated["w"])
    assert np.all((step >= 0.9 * 0.01) & (step <= 0.01))
    assert_array_equal(np.sign(updated["w"]), -np.sign(g))


def test_adam_two_step_oracle():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    theta = 0.3
    m = v = 0.0
    for t, g in enumerate((1.0, 0.5), start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

    p = Param("w", np.array([0.3]))
    opt = Adam([p], lr=lr)
    for g in (1.0, 0.5):
        p.grad = np.array([g])
        opt.step()
    assert p.data[0] == pytest.approx(theta, abs=1e-12)
    assert opt.state.t == 2


def test_adam_leaves_inputs_untouched():
    params, grads = {"w": np.ones(3)}, {"w": np.ones(3)}
    state = AdamState()
    adam_step(params, grads, state, lr=0.1)
    assert_array_equal(params["w"], np.ones(3))
    assert state.t == 0 and state.m == {}


def test_adam_rejects_duplicate_names():
    with pytest.raises(ValueError):
        Adam([Param("w", np.zeros(1)), Param("w", np.zeros(1))])


# checkpoints


def test_checkpoint_round_trip(tmp_path, rng):
    params = [Param("a.weight", rng.normal(size=(2, 1, 3, 3))), Param("a.bias", rng.normal(size=2))]
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(path, params)
    stored = load_checkpoint(path)
    assert list(stored) == ["a.weight", "a.bias"]
    for p in params:
        assert_array_equal(stored[p.name], p.data)

    fresh = [Param("a.weight", np.zeros((2, 1, 3, 3))), Param("a.bias", np.zeros(2))]
    load_into(fresh, path)
    for p, q in zip(params, fresh):
        assert_array_equal(p.data, q.data)

    with open(path, "rb") as f:
        payload = f.read()
    assert payload[:8] == b"VMTCKPT1"
    assert struct.unpack("<I", payload[8:12])[0] == 2


def test_checkpoint_errors(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(str(path), {"w": np.ones(3)})
    payload = path.read_bytes()

    (tmp_path / "magic.ckpt").write_bytes(b"NOTACKPT" + payload[8:])
    (tmp_path / "short.ckpt").write_bytes(payload[:-4])
    (tmp_path / "long.ckpt").write_bytes(payload + b"\x00")
    for name in ("magic.ckpt", "short.ckpt", "long.ckpt"):
        with pytest.raises(DecodeError) as info:
            load_checkpoint(str(tmp_path / name))
        assert name in str(info.value)

    with pytest.raises(IoError):
        load_checkpoint(str(tmp_path / "missing.ckpt"))
    with pytest.raises(ShapeMismatch):
        load_into([Param("w", np.zeros(4))], str(path))
    with pytest.raises(DecodeError):
        load_into([Param("other", np.zeros(3))], str(path))
