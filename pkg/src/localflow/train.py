"""Adam optimization of one flow-matching block between two sample pools.

One block regresses a velocity network onto the time derivative of the
chosen interpolation path between a left endpoint batch (drawn from the
source pool) and a right endpoint batch (produced by a caller-supplied
sampler, e.g. the OU image of the pool or plain standard normals for the
last block).  Times are drawn per sample.  All randomness flows through
sub-streams derived from ``cfg.seed``, so a block retrains bit-identically.
"""

from dataclasses import dataclass, field

import numpy as np

from .flowmath import TimeSampler, interp, interp_deriv
from .mlp import VelocityField, init_params, loss_and_grad
from .seeding import rng_for


class NumericsError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class AdamConfig:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_factor: float = 1.0
    decay_every: int = 1000

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError(f"decay_factor must lie in (0, 1], got {self.decay_factor}")
        if self.decay_every < 1:
            raise ValueError(f"decay_every must be >= 1, got {self.decay_every}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, n_params):
        return cls(np.zeros(n_params), np.zeros(n_params), 0)


def effective_lr(cfg, step):
    """Learning rate used at 1-indexed Adam step: decays every decay_every calls."""
    return cfg.lr * cfg.decay_factor ** ((step - 1) // cfg.decay_every)


def adam_step(params, grad, state, cfg):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if grad.shape != params.shape:
        raise ValueError(f"grad shape {grad.shape} does not match params {params.shape}")
    step = state.step + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** step)
    v_hat = v / (1.0 - cfg.beta2 ** step)
    new_params = params - effective_lr(cfg, step) * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new_params, AdamState(m, v, step)


@dataclass(frozen=True)
class BlockTrainConfig:
    adam: AdamConfig
    batch_size: int
    n_batches: int
    interpolant: str = "trig"
    time_sampler: TimeSampler = field(default_factory=TimeSampler)
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.n_batches < 1:
            raise ValueError(
                f"batch_size and n_batches must be positive, got ({self.batch_size}, {self.n_batches})"
            )


def train_block(left_pool, right_sampler, spec, cfg):
    """Fit one velocity network between the pool and the right sampler's law.

    Per batch: left rows by index with replacement, a right batch from
    ``right_sampler(n, rng)``, per-sample Beta times, then one Adam step on
    the mean squared residual against the path derivative.  Returns the
    trained field and the loss history (one entry per batch).
    """
    left_pool = np.asarray(left_pool, dtype=np.float64)
    if left_pool.ndim != 2 or left_pool.shape[0] == 0:
        raise ValueError(f"left pool must be a nonempty 2-d array, got shape {left_pool.shape}")
    if left_pool.shape[1] != spec.input_dim:
        raise ValueError(
            f"pool dimension {left_pool.shape[1]} does not match network dimension {spec.input_dim}"
        )

    params = init_params(spec, rng_for(cfg.seed, "init"))
    state = AdamState.fresh(params.size)
    batch_rng = rng_for(cfg.seed, "batches")
    history = np.empty(cfg.n_batches)

    for b in range(cfg.n_batches):
        idx = batch_rng.integers(0, left_pool.shape[0], size=cfg.batch_size)
        x_l = left_pool[idx]
        x_r = np.asarray(right_sampler(cfg.batch_size, batch_rng), dtype=np.float64)
        if x_r.shape != x_l.shape:
            raise ValueError(f"right sampler returned shape {x_r.shape}, expected {x_l.shape}")
        t = cfg.time_sampler.sample(batch_rng, cfg.batch_size)
        phi = interp(cfg.interpolant, t, x_l, x_r)
        target = interp_deriv(cfg.interpolant, t, x_l, x_r)
        field_now = VelocityField(spec, params)
        loss, grad = loss_and_grad(field_now, phi, t, target)
        if not np.isfinite(loss):
            raise NumericsError(f"non-finite loss at batch {b}")
        history[b] = loss
        params, state = adam_step(params, grad, state, cfg.adam)

    return VelocityField(spec, params), history


def gaussian_right_sampler(dim):
    """Right-endpoint sampler drawing from the equilibrium N(0, I)."""

    def sampler(n, rng):
        return rng.standard_normal((n, dim))

    return sampler
