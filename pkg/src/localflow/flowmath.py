"""Interpolation paths, time sampling, OU endpoint construction, and schedules.

The regression target of each sub-flow is built from two endpoint batches:
``x_l`` drawn from the current source pool and ``x_r`` from the source pool
diffused for one step of the Ornstein-Uhlenbeck process
``dX = -X dt + sqrt(2) dW`` (equilibrium N(0, I)).  The closed-form law of
that step, ``e^{-t} X + sqrt(1 - e^{-2t}) Z``, also yields exact diagonal
Gaussian marginals used by the divergence checks in :mod:`localflow.metrics`.
"""

from dataclasses import dataclass, field

import numpy as np

INTERPOLANTS = ("ot", "trig")


@dataclass(frozen=True)
class TimeSampler:
    """Beta(alpha, beta) distribution for the training times in [0, 1]."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    def sample(self, rng, n=None):
        return rng.beta(self.alpha, self.beta, size=n)


@dataclass(frozen=True)
class DiagGaussian:
    """Gaussian with diagonal covariance; mean and per-coordinate variance."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "var", np.asarray(self.var, dtype=np.float64))
        if self.mean.shape != self.var.shape or self.mean.ndim != 1:
            raise ValueError(f"mean/var shapes {self.mean.shape}/{self.var.shape} must match and be 1-d")
        if np.any(self.var <= 0):
            raise ValueError("variances must be positive")

    @property
    def dim(self):
        return self.mean.size

    def sample(self, rng, n):
        return self.mean + np.sqrt(self.var) * rng.standard_normal((n, self.dim))

    def second_moment(self):
        """E||X||^2 = ||mean||^2 + sum of variances."""
        return float(self.mean @ self.mean + self.var.sum())


def standard_gaussian(dim):
    return DiagGaussian(np.zeros(dim), np.ones(dim))


def _check_kind_t(kind, t):
    if kind not in INTERPOLANTS:
        raise ValueError(f"unknown interpolant {kind!r}, expected one of {INTERPOLANTS}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"interpolation time must lie in [0, 1], got {t}")
    return t


def _per_sample(t, x):
    return t if t.ndim == 0 or x.ndim == 1 else t[:, None]


def interp(kind, t, x_l, x_r):
    """Point on the path from x_l (t=0) to x_r (t=1).

    ot:   x_l + t (x_r - x_l)
    trig: cos(pi t / 2) x_l + sin(pi t / 2) x_r
    """
    t = _check_kind_t(kind, t)
    x_l = np.asarray(x_l, dtype=np.float64)
    x_r = np.asarray(x_r, dtype=np.float64)
    tt = _per_sample(t, x_l)
    if kind == "ot":
        return x_l + tt * (x_r - x_l)
    return np.cos(0.5 * np.pi * tt) * x_l + np.sin(0.5 * np.pi * tt) * x_r


def interp_deriv(kind, t, x_l, x_r):
    """Exact time derivative of :func:`interp` (the regression target)."""
    t = _check_kind_t(kind, t)
    x_l = np.asarray(x_l, dtype=np.float64)
    x_r = np.asarray(x_r, dtype=np.float64)
    tt = _per_sample(t, x_l)
    if kind == "ot":
        return np.broadcast_to(x_r - x_l, x_l.shape).copy() if np.ndim(tt) else x_r - x_l
    half_pi = 0.5 * np.pi
    return half_pi * (-np.sin(half_pi * tt) * x_l + np.cos(half_pi * tt) * x_r)


def ou_step(x, gamma, rng):
    """One closed-form OU step of duration gamma applied to sample rows x."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    decay = np.exp(-gamma)
    noise_std = np.sqrt(-np.expm1(-2.0 * gamma))
    return decay * x + noise_std * rng.standard_normal(x.shape)


def ou_right_sample(pool, gamma, rng, n):
    """Batch from the OU image of the pool's law: fresh pool rows, then noise."""
    pool = np.asarray(pool)
    if pool.shape[0] == 0:
        raise ValueError("empty sample pool")
    idx = rng.integers(0, pool.shape[0], size=n)
    return ou_step(pool[idx], gamma, rng)


def ou_pair_sample(pool, gamma, rng, n):
    """Endpoint batches (x_l, x_r) with independent pool draws on each side.

    x_l rows and the rows underlying x_r use separate index draws (with
    replacement), so the coupling is independent rather than shared.
    """
    pool = np.asarray(pool)
    if pool.shape[0] == 0:
        raise ValueError("empty sample pool")
    idx_l = rng.integers(0, pool.shape[0], size=n)
    x_l = pool[idx_l].astype(np.float64, copy=True)
    x_r = ou_right_sample(pool, gamma, rng, n)
    return x_l, x_r


def ou_gaussian_marginal(g, t):
    """Exact diagonal-Gaussian law after running the OU process for time t."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    decay = np.exp(-t)
    return DiagGaussian(decay * g.mean, decay * decay * g.var + -np.expm1(-2.0 * t))


@dataclass(frozen=True)
class Schedule:
    """Geometric step-size schedule gamma_n = rho^(n-1) c for n = 1..N."""

    c: float
    rho: float
    n_blocks: int
    gammas: np.ndarray = field(init=False)
    timestamps: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.c <= 0 or self.rho <= 0:
            raise ValueError(f"c and rho must be positive, got ({self.c}, {self.rho})")
        if self.n_blocks < 1:
            raise ValueError(f"n_blocks must be >= 1, got {self.n_blocks}")
        gammas = self.c * self.rho ** np.arange(self.n_blocks)
        stamps = np.concatenate([[0.0], np.cumsum(gammas)])
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "timestamps", stamps)

    @property
    def total_time(self):
        return float(self.timestamps[-1])


def make_schedule(c, rho, n_blocks):
    return Schedule(float(c), float(rho), int(n_blocks))
