import numpy as np
import pytest

from localflow.mlp import (
    MlpSpec,
    VelocityField,
    forward,
    forward_and_trace,
    init_params,
    jacobian_trace,
    loss_and_grad,
    random_field,
    zero_field,
)

from conftest import (
    fd_divergence,
    fd_param_gradient,
    forward_oracle,
    linear_field_params,
    linear_field_spec,
    max_rel_err,
)


def small_specs():
    return [
        MlpSpec(2, (8,), "relu"),
        MlpSpec(2, (6, 6), "softplus"),
        MlpSpec(3, (5,), "elu", time_features="sinusoidal", sinusoidal_k=2),
        MlpSpec(4, (7, 5), "tanh"),
        MlpSpec(2, (4,), "softplus", time_features="none"),
        MlpSpec(1, (3, 3, 3), "elu"),
    ]


def test_zero_network_outputs_zero():
    field = zero_field(MlpSpec(3, (8, 8), "relu"))
    x = np.array([0.5, -1.0, 2.0])
    assert np.all(forward(field, x, 0.7) == 0.0)
    assert jacobian_trace(field, x, 0.7) == 0.0


def test_identity_linear_layer():
    # single affine layer, identity on the x block, zero on the time column
    spec = linear_field_spec(2)
    field = VelocityField(spec, linear_field_params(spec, np.eye(2)))
    out = forward(field, np.array([1.0, 2.0]), 0.3)
    assert np.allclose(out, [1.0, 2.0], atol=0.0)
    assert jacobian_trace(field, np.array([1.0, 2.0]), 0.3) == pytest.approx(2.0, abs=1e-14)


def test_forward_matches_straight_line_oracle(rng):
    for spec in small_specs():
        field = random_field(spec, rng)
        for _ in range(3):
            x = rng.normal(size=spec.input_dim)
            t = float(rng.uniform())
            got = forward(field, x, t)
            want = forward_oracle(spec, field.params, x, t)
            assert np.max(np.abs(got - want)) < 1e-12


def test_forward_batch_agrees_with_rows(rng):
    spec = MlpSpec(3, (6, 4), "softplus")
    field = random_field(spec, rng)
    xs = rng.normal(size=(5, 3))
    ts = rng.uniform(size=5)
    batch = forward(field, xs, ts)
    for i in range(5):
        assert np.allclose(batch[i], forward(field, xs[i], ts[i]), atol=0.0)


def test_loss_zero_when_targets_match(rng):
    spec = MlpSpec(2, (6,), "tanh")
    field = random_field(spec, rng)
    xs = rng.normal(size=(4, 2))
    ts = rng.uniform(size=4)
    targets = forward(field, xs, ts)
    loss, grad = loss_and_grad(field, xs, ts, targets)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_loss_zero_params_equals_target_norm():
    field = zero_field(MlpSpec(2, (5,), "relu"))
    u = np.array([1.5, -2.0])
    loss, _ = loss_and_grad(field, np.zeros((1, 2)), np.array([0.2]), u[None, :])
    assert loss == pytest.approx(float(u @ u), abs=1e-15)


def test_gradient_matches_finite_differences(rng):
    for spec in small_specs():
        field = random_field(spec, rng)
        xs = rng.normal(size=(6, spec.input_dim))
        ts = rng.uniform(size=6)
        targets = rng.normal(size=(6, spec.input_dim))
        _, grad = loss_and_grad(field, xs, ts, targets)

        def loss_of(p, f=field, xs=xs, ts=ts, targets=targets):
            return loss_and_grad(VelocityField(f.spec, p), xs, ts, targets)[0]

        fd = fd_param_gradient(loss_of, field.params)
        floor = 1e-3 * max(1.0, float(np.max(np.abs(fd))))
        assert max_rel_err(grad, fd, floor) < 1e-6


def test_jacobian_trace_matches_finite_differences(rng):
    for spec in small_specs():
        if spec.activation == "relu":
            continue  # kinks make central differences unreliable
        field = random_field(spec, rng)
        x = rng.normal(size=spec.input_dim)
        t = float(rng.uniform())
        tr = jacobian_trace(field, x, t)
        fd = fd_divergence(lambda y: forward(field, y, t), x)
        assert abs(tr - fd) / max(abs(fd), 1e-3) < 1e-5


def test_trace_equals_sum_of_directional_derivatives(rng):
    # independent route: d directional derivatives e_i^T (dv/dx) e_i, each
    # from its own one-sided pair of forward evaluations
    spec = MlpSpec(3, (6, 6), "softplus")
    field = random_field(spec, rng)
    x = rng.normal(size=3)
    t = 0.4
    h = 1e-6
    total = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        total += (forward(field, x + e, t)[i] - forward(field, x - e, t)[i]) / (2 * h)
    assert abs(jacobian_trace(field, x, t) - total) < 1e-7


def test_forward_and_trace_consistent(rng):
    spec = MlpSpec(2, (6,), "elu")
    field = random_field(spec, rng)
    xs = rng.normal(size=(4, 2))
    v, tr = forward_and_trace(field, xs, 0.3)
    assert np.array_equal(v, forward(field, xs, 0.3))
    assert np.array_equal(tr, jacobian_trace(field, xs, 0.3))


def test_linear_scaling_property(rng):
    # purely affine net with zero bias: scaling the weights scales the output
    spec = linear_field_spec(3)
    m = rng.normal(size=(3, 3))
    f1 = VelocityField(spec, linear_field_params(spec, m))
    f2 = VelocityField(spec, linear_field_params(spec, 2.5 * m))
    x = rng.normal(size=3)
    assert np.allclose(forward(field=f2, x=x, t=0.1), 2.5 * forward(f1, x, 0.1), rtol=1e-15)


def test_determinism(rng):
    spec = MlpSpec(2, (8, 8), "softplus")
    field = random_field(spec, rng)
    x = rng.normal(size=2)
    a = forward(field, x, 0.25)
    b = forward(field, x, 0.25)
    assert np.array_equal(a, b)
    assert jacobian_trace(field, x, 0.25) == jacobian_trace(field, x, 0.25)


def test_dimension_mismatch_error(rng):
    field = random_field(MlpSpec(2, (4,), "relu"), rng)
    with pytest.raises(ValueError, match="expected"):
        forward(field, np.zeros(3), 0.1)


def test_empty_batch_error(rng):
    field = random_field(MlpSpec(2, (4,), "relu"), rng)
    with pytest.raises(ValueError, match="empty"):
        loss_and_grad(field, np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)))


def test_param_vector_length_checked():
    with pytest.raises(ValueError, match="spec requires"):
        VelocityField(MlpSpec(2, (4,), "relu"), np.zeros(3))


def test_init_params_shape_and_bias(rng):
    spec = MlpSpec(2, (5,), "relu")
    p = init_params(spec, rng)
    assert p.shape == (spec.param_count(),)
    # biases of the first layer sit right after its 5x3 weight block
    assert np.all(p[15:20] == 0.0)
