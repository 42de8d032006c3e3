import math

import numpy as np
import pytest

from localflow.mlp import MlpSpec


def forward_oracle(spec, params, x, t):
    """Straight-line re-evaluation of the network with explicit python loops.

    Deliberately shares no code with localflow.mlp: parameters are unpacked
    by hand and every dot product is written out, so agreement checks the
    packing convention as well as the arithmetic.
    """
    feats = []
    if spec.time_features == "raw":
        feats = [t]
    elif spec.time_features == "sinusoidal":
        for j in range(spec.sinusoidal_k):
            w = 0.5 * math.pi * (2.0 ** j)
            feats += [math.sin(w * t), math.cos(w * t)]
    a = [float(v) for v in x] + feats

    def act(z):
        if spec.activation == "relu":
            return max(z, 0.0)
        if spec.activation == "softplus":
            return z if z > 30.0 else math.log1p(math.exp(z))
        if spec.activation == "elu":
            return z if z > 0.0 else math.expm1(z)
        return math.tanh(z)

    dims = [spec.input_dim + len(feats), *spec.hidden_widths, spec.input_dim]
    off = 0
    for layer in range(len(dims) - 1):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        w = params[off:off + fan_out * fan_in]
        off += fan_out * fan_in
        b = params[off:off + fan_out]
        off += fan_out
        z = [
            sum(w[j * fan_in + k] * a[k] for k in range(fan_in)) + b[j]
            for j in range(fan_out)
        ]
        last = layer == len(dims) - 2
        a = z if last else [act(v) for v in z]
    return np.array(a)


def fd_param_gradient(loss_fn, params, h=1e-5):
    """Central finite differences of a scalar loss in every parameter."""
    grad = np.zeros_like(params)
    for i in range(params.size):
        p_hi = params.copy()
        p_hi[i] += h
        p_lo = params.copy()
        p_lo[i] -= h
        grad[i] = (loss_fn(p_hi) - loss_fn(p_lo)) / (2.0 * h)
    return grad


def fd_divergence(vec_fn, x, h=1e-5):
    """Central finite-difference divergence sum_i d v_i / d x_i at a point."""
    total = 0.0
    for i in range(x.size):
        x_hi = x.copy()
        x_hi[i] += h
        x_lo = x.copy()
        x_lo[i] -= h
        total += (vec_fn(x_hi)[i] - vec_fn(x_lo)[i]) / (2.0 * h)
    return total


def linear_field_spec(d, time_features="raw"):
    """Spec for a pure affine network (no hidden layers)."""
    return MlpSpec(input_dim=d, hidden_widths=(), activation="relu",
                   time_features=time_features)


def linear_field_params(spec, matrix, bias=None):
    """Parameters realizing v(x, t) = matrix @ x + bias, ignoring time features."""
    d = spec.input_dim
    w = np.zeros((d, d + spec.time_width))
    w[:, :d] = matrix
    b = np.zeros(d) if bias is None else np.asarray(bias, dtype=float)
    return np.concatenate([w.ravel(), b])


def max_rel_err(approx, exact, floor):
    """Worst coordinatewise |approx - exact| / max(|exact|, floor)."""
    approx = np.atleast_1d(np.asarray(approx, dtype=float))
    exact = np.atleast_1d(np.asarray(exact, dtype=float))
    denom = np.maximum(np.abs(exact), floor)
    return float(np.max(np.abs(approx - exact) / denom))


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
