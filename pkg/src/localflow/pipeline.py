"""Sequential training of flow blocks, generation, likelihoods, distillation.

Training walks the data pool toward noise: block n regresses a velocity
field between the current pool and its one-OU-step image (the final block
targets N(0, I) directly), then pushes the whole pool forward through the
learned transport before the next block trains.  Generation runs the
reverse-time ODE through the blocks from noise back to data.  Per-sample
log-likelihoods accumulate the exact divergence integral of every block on
the forward pass.  A trained stack can be distilled into a handful of
one-evaluation residual maps fitted to segments of its reverse chain.
"""

from dataclasses import dataclass

import numpy as np

from .flowmath import ou_right_sample
from .mlp import MlpSpec, VelocityField, forward, loss_and_grad, init_params
from .odeint import IntegratorConfig, integrate, integrate_with_divergence
from .seeding import derive_seed, rng_for
from .train import AdamState, BlockTrainConfig, NumericsError, adam_step, train_block

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class SubFlow:
    """One trained block: its velocity field, OU step size, interpolant tag."""

    field: VelocityField
    gamma: float
    interpolant: str

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass
class LocalFlowModel:
    """An ordered stack of sub-flows forming one invertible data-noise transport."""

    dim: int
    blocks: list
    integrator: IntegratorConfig

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("model needs at least one block")
        for i, blk in enumerate(self.blocks):
            if blk.field.spec.input_dim != self.dim:
                raise ValueError(
                    f"block {i} has dimension {blk.field.spec.input_dim}, model is {self.dim}-d"
                )

    @property
    def n_blocks(self):
        return len(self.blocks)


@dataclass
class DistilledModel:
    """Residual one-step maps x -> x + f_n(x), applied noise side first."""

    dim: int
    maps: list

    def __post_init__(self):
        if not self.maps:
            raise ValueError("distilled model needs at least one map")
        for i, f in enumerate(self.maps):
            if f.spec.input_dim != self.dim:
                raise ValueError(f"map {i} has dimension {f.spec.input_dim}, model is {self.dim}-d")
            if f.spec.time_features != "none":
                raise ValueError(f"map {i} must be time-independent")

    @property
    def n_steps(self):
        return len(self.maps)


def block_seed(root_seed, n):
    """Seed of the n-th block's training streams (1-indexed), derived from the run seed."""
    return derive_seed(root_seed, "block", n)


def train_model(data, schedule, per_block, spec, integrator=IntegratorConfig()):
    """Train the full stack; returns (model, loss histories, pushed pools).

    ``per_block`` seeds every block's init/batch streams through
    :func:`block_seed`.  Pools ``[p_0, ..., p_N]`` are returned with the
    training pool pushed through all trained blocks, the last entry being
    the pool's image near N(0, I).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError(f"data must be a nonempty 2-d array, got shape {data.shape}")
    dim = data.shape[1]
    if spec.input_dim != dim:
        raise ValueError(f"network dimension {spec.input_dim} does not match data dimension {dim}")

    n_blocks = schedule.n_blocks
    pools = [data]
    blocks = []
    histories = []
    pool = data
    for n in range(1, n_blocks + 1):
        gamma = float(schedule.gammas[n - 1])
        if n < n_blocks:
            frozen = pool

            def right_sampler(count, rng, _pool=frozen, _gamma=gamma):
                return ou_right_sample(_pool, _gamma, rng, count)
        else:
            def right_sampler(count, rng):
                return rng.standard_normal((count, dim))

        cfg = BlockTrainConfig(
            adam=per_block.adam,
            batch_size=per_block.batch_size,
            n_batches=per_block.n_batches,
            interpolant=per_block.interpolant,
            time_sampler=per_block.time_sampler,
            seed=block_seed(per_block.seed, n),
        )
        field, history = train_block(pool, right_sampler, spec, cfg)
        blocks.append(SubFlow(field, gamma, per_block.interpolant))
        histories.append(history)
        pool = integrate(field, pool, "fwd", integrator)
        pools.append(pool)

    return LocalFlowModel(dim, blocks, integrator), histories, pools


def push_forward(model, xs):
    """Transport sample rows through all blocks (data side to noise side)."""
    x = np.asarray(xs, dtype=np.float64)
    for blk in model.blocks:
        x = integrate(blk.field, x, "fwd", model.integrator)
    return x


def generate(model, n_samples, rng):
    """Draw noise and run the reverse-time ODE through the blocks, last first."""
    y = rng.standard_normal((n_samples, model.dim))
    for blk in reversed(model.blocks):
        y = integrate(blk.field, y, "rev", model.integrator)
    return y


def log_density_standard_normal(x):
    x = np.asarray(x, dtype=np.float64)
    sq = np.sum(x * x, axis=-1)
    return -0.5 * (x.shape[-1] * LOG_2PI + sq)


def nll(model, xs):
    """Per-sample negative log-likelihood in nats via the divergence integral.

    Each sample is pushed through every block while the exact Jacobian trace
    is integrated along the way; the result is
    ``-(log N(0,I)(x_final) + sum of all blocks' divergence integrals)``.
    """
    x = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise ValueError(f"data dimension {x.shape[1]} does not match model dimension {model.dim}")
    total_div = np.zeros(x.shape[0])
    for i, blk in enumerate(model.blocks, start=1):
        x, div = integrate_with_divergence(blk.field, x, "fwd", model.integrator)
        total_div += div
        if not np.all(np.isfinite(total_div)):
            raise NumericsError(f"non-finite divergence integral after block {i}")
    values = -(log_density_standard_normal(x) + total_div)
    return values if np.ndim(xs) > 1 else float(values[0])


def reverse_chain(model, n_samples, rng):
    """States of one noise batch walked back through the blocks.

    Returns ``[q_0, ..., q_N]`` indexed by forward position: entry N is the
    noise draw, entry 0 the generated data; all entries track the same
    particles.
    """
    states = [None] * (model.n_blocks + 1)
    y = rng.standard_normal((n_samples, model.dim))
    states[model.n_blocks] = y
    for n in range(model.n_blocks, 0, -1):
        y = integrate(model.blocks[n - 1].field, y, "rev", model.integrator)
        states[n - 1] = y
    return states


def _train_residual_map(x_in, x_out, spec, cfg):
    """Adam regression of the displacement x_out - x_in onto a residual net."""
    params = init_params(spec, rng_for(cfg.seed, "init"))
    state = AdamState.fresh(params.size)
    batch_rng = rng_for(cfg.seed, "batches")
    disp = x_out - x_in
    history = np.empty(cfg.n_batches)
    for b in range(cfg.n_batches):
        idx = batch_rng.integers(0, x_in.shape[0], size=cfg.batch_size)
        field_now = VelocityField(spec, params)
        loss, grad = loss_and_grad(field_now, x_in[idx], 0.0, disp[idx])
        if not np.isfinite(loss):
            raise NumericsError(f"non-finite loss at batch {b}")
        history[b] = loss
        params, state = adam_step(params, grad, state, cfg.adam)
    return VelocityField(spec, params), history


def distill(teacher, chain, k, cfg, spec):
    """Compress an N-block stack into N/k residual maps fitted to its reverse chain.

    ``chain`` must be the output of :func:`reverse_chain`: the same particles
    at every position.  Distilled step n regresses the displacement between
    chain positions N-k(n-1) and N-kn, and generation applies the maps in
    that order, noise side first.  Returns (model, loss histories).
    """
    n_blocks = teacher.n_blocks
    if k < 1 or n_blocks % k != 0:
        raise ValueError(f"k={k} must divide the teacher's block count {n_blocks}")
    if len(chain) != n_blocks + 1:
        raise ValueError(f"chain has {len(chain)} states, expected {n_blocks + 1}")
    if spec.time_features != "none":
        raise ValueError("distilled residual maps take no time input")
    n_steps = n_blocks // k
    maps = []
    histories = []
    for n in range(1, n_steps + 1):
        x_in = chain[n_blocks - k * (n - 1)]
        x_out = chain[n_blocks - k * n]
        step_cfg = BlockTrainConfig(
            adam=cfg.adam,
            batch_size=cfg.batch_size,
            n_batches=cfg.n_batches,
            interpolant=cfg.interpolant,
            time_sampler=cfg.time_sampler,
            seed=derive_seed(cfg.seed, "distill", n),
        )
        f, history = _train_residual_map(x_in, x_out, spec, step_cfg)
        maps.append(f)
        histories.append(history)
    return DistilledModel(teacher.dim, maps), histories


def generate_distilled(dm, n_samples, rng):
    """Noise to data in exactly one network evaluation per residual map."""
    y = rng.standard_normal((n_samples, dm.dim))
    for f in dm.maps:
        y = y + forward(f, y, 0.0)
    return y
