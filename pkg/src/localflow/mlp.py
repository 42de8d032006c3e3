"""Small fully connected velocity-field networks with exact hand-rolled gradients.

A network maps ``(x, t)`` to a vector of the same dimension as ``x``.  Time
enters only through features appended to the input: the raw scalar, a bank
of sin/cos pairs at geometrically spaced frequencies, or nothing at all (for
time-independent residual maps).  Everything is float64 and implemented
directly in numpy: forward evaluation, reverse-mode parameter gradients of
the mean-squared regression loss, and the exact spatial Jacobian trace via
one backward pass per output coordinate.

Parameters live in one flat float64 vector, laid out layer by layer as the
row-major weight matrix followed by the bias vector.
"""

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "softplus", "elu", "tanh")
TIME_FEATURES = ("none", "raw", "sinusoidal")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a velocity-field network.

    ``hidden_widths`` may be empty, which degenerates to a single affine
    layer (no activation anywhere); tests use this to realize exactly linear
    fields.  ``time_features="sinusoidal"`` appends ``sinusoidal_k`` sin/cos
    pairs of ``t`` at the geometric frequencies ``(pi/2) * 2**j``, so the
    slowest pair is monotone over [0, 1]; ``"raw"`` appends the scalar ``t``;
    ``"none"`` makes the network a pure map of ``x``.
    """

    input_dim: int
    hidden_widths: tuple
    activation: str = "softplus"
    time_features: str = "raw"
    sinusoidal_k: int = 4

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be positive, got {self.hidden_widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")
        if self.time_features not in TIME_FEATURES:
            raise ValueError(f"unknown time_features {self.time_features!r}, expected one of {TIME_FEATURES}")
        if self.time_features == "sinusoidal" and self.sinusoidal_k < 1:
            raise ValueError(f"sinusoidal_k must be >= 1, got {self.sinusoidal_k}")

    @property
    def time_width(self):
        if self.time_features == "none":
            return 0
        if self.time_features == "raw":
            return 1
        return 2 * self.sinusoidal_k

    def layer_dims(self):
        """Widths of consecutive layers, input features first, output last."""
        return [self.input_dim + self.time_width, *self.hidden_widths, self.input_dim]

    def param_count(self):
        dims = self.layer_dims()
        return sum(dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(dims) - 1))


def init_params(spec, rng):
    """Glorot-uniform weights, zero biases, packed into one flat vector.

    Weights of layer l are drawn before layer l+1; the draw order is part of
    the reproducibility contract.
    """
    dims = spec.layer_dims()
    chunks = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-a, a, size=fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack_params(spec, params):
    """Views (W, b) per layer into the flat parameter vector."""
    dims = spec.layer_dims()
    layers = []
    off = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = params[off:off + fan_out * fan_in].reshape(fan_out, fan_in)
        off += fan_out * fan_in
        b = params[off:off + fan_out]
        off += fan_out
        layers.append((w, b))
    return layers


@dataclass
class VelocityField:
    """An MlpSpec together with its flat float64 parameter vector."""

    spec: MlpSpec
    params: np.ndarray

    def __post_init__(self):
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        expected = self.spec.param_count()
        if self.params.shape != (expected,):
            raise ValueError(
                f"parameter vector has shape {self.params.shape}, spec requires ({expected},)"
            )


def random_field(spec, rng):
    return VelocityField(spec, init_params(spec, rng))


def zero_field(spec):
    return VelocityField(spec, np.zeros(spec.param_count()))


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "softplus":
        # log1p(exp(z)) with linear asymptote above 30 to avoid overflow
        return np.where(z > 30.0, z, np.log1p(np.exp(np.minimum(z, 30.0))))
    if name == "elu":
        return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))
    return np.tanh(z)


def _act_deriv(name, z):
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "softplus":
        # sigmoid(z), computed stably on both tails
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "elu":
        return np.where(z > 0.0, 1.0, np.exp(np.minimum(z, 0.0)))
    th = np.tanh(z)
    return 1.0 - th * th


def time_features(spec, t, n):
    """Time-feature block of shape (n, spec.time_width) for scalar or per-sample t."""
    t = np.asarray(t, dtype=np.float64)
    col = np.full(n, float(t)) if t.ndim == 0 else t
    if col.shape != (n,):
        raise ValueError(f"t has shape {t.shape}, expected scalar or ({n},)")
    if spec.time_features == "none":
        return np.empty((n, 0))
    if spec.time_features == "raw":
        return col[:, None]
    freqs = 0.5 * np.pi * 2.0 ** np.arange(spec.sinusoidal_k)
    ang = col[:, None] * freqs[None, :]
    feats = np.empty((n, 2 * spec.sinusoidal_k))
    feats[:, 0::2] = np.sin(ang)
    feats[:, 1::2] = np.cos(ang)
    return feats


def _as_batch(spec, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != spec.input_dim:
        raise ValueError(
            f"input has shape {x.shape}, expected (..., {spec.input_dim})"
        )
    return xb, single


def _forward_cached(field, xb, t):
    """Forward pass keeping pre-activations and activations for backprop."""
    spec = field.spec
    layers = unpack_params(spec, field.params)
    a0 = np.concatenate([xb, time_features(spec, t, xb.shape[0])], axis=1)
    acts = [a0]
    zs = []
    a = a0
    for w, b in layers[:-1]:
        z = a @ w.T + b
        zs.append(z)
        a = _act(spec.activation, z)
        acts.append(a)
    w_out, b_out = layers[-1]
    y = a @ w_out.T + b_out
    return y, (layers, acts, zs)


def forward(field, x, t):
    """Evaluate the velocity v(x, t).

    ``x`` may be a single vector or a batch of rows; ``t`` a scalar or one
    value per row.  Output matches the shape of ``x``.
    """
    xb, single = _as_batch(field.spec, x)
    y, _ = _forward_cached(field, xb, t)
    return y[0] if single else y


def loss_and_grad(field, xs, ts, targets):
    """Mean squared residual over a batch and its exact parameter gradient.

    loss = mean_i || v(x_i, t_i) - u_i ||^2, gradient laid out like params.
    """
    xb, _ = _as_batch(field.spec, np.atleast_2d(np.asarray(xs, dtype=np.float64)))
    if xb.shape[0] == 0:
        raise ValueError("empty batch")
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if targets.shape != xb.shape:
        raise ValueError(f"targets have shape {targets.shape}, expected {xb.shape}")
    n = xb.shape[0]
    y, (layers, acts, zs) = _forward_cached(field, xb, ts)
    resid = y - targets
    loss = float(np.sum(resid * resid)) / n

    act = field.spec.activation
    grads = [None] * len(layers)
    delta = (2.0 / n) * resid
    for l in range(len(layers) - 1, -1, -1):
        w, _ = layers[l]
        grads[l] = (delta.T @ acts[l], delta.sum(axis=0))
        if l > 0:
            delta = (delta @ w) * _act_deriv(act, zs[l - 1])
    flat = np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])
    return loss, flat


def jacobian_trace(field, x, t):
    """Exact divergence of v with respect to x, one backward pass per coordinate."""
    xb, single = _as_batch(field.spec, x)
    _, (layers, _, zs) = _forward_cached(field, xb, t)
    act = field.spec.activation
    derivs = [_act_deriv(act, z) for z in zs]
    d = field.spec.input_dim
    n = xb.shape[0]
    tr = np.zeros(n)
    for i in range(d):
        delta = np.zeros((n, d))
        delta[:, i] = 1.0
        for l in range(len(layers) - 1, 0, -1):
            delta = (delta @ layers[l][0]) * derivs[l - 1]
        grad_in = delta @ layers[0][0]
        tr += grad_in[:, i]
    return float(tr[0]) if single else tr


def forward_and_trace(field, x, t):
    """Velocity and divergence from one shared forward pass (for ODE likelihoods)."""
    xb, single = _as_batch(field.spec, x)
    y, (layers, _, zs) = _forward_cached(field, xb, t)
    act = field.spec.activation
    derivs = [_act_deriv(act, z) for z in zs]
    d = field.spec.input_dim
    n = xb.shape[0]
    tr = np.zeros(n)
    for i in range(d):
        delta = np.zeros((n, d))
        delta[:, i] = 1.0
        for l in range(len(layers) - 1, 0, -1):
            delta = (delta @ layers[l][0]) * derivs[l - 1]
        tr += (delta @ layers[0][0])[:, i]
    if single:
        return y[0], float(tr[0])
    return y, tr
