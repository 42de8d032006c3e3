"""Closed-form divergences on diagonal Gaussians and two-sample statistics.

Every quantity here is exact on diagonal Gaussians, which turns the
contraction/monotonicity facts about the OU process into machine-checkable
inequalities: chi-square from the per-coordinate integral of p^2/q, KL and
Wasserstein-2 from their standard closed forms.  For sample clouds there is
the energy distance with a label-permutation test.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .flowmath import DiagGaussian, ou_gaussian_marginal, standard_gaussian


def fit_diag_gaussian(samples):
    """Diagonal Gaussian fit (sample mean, unbiased per-coordinate variance)."""
    samples = np.asarray(samples, dtype=np.float64)
    return DiagGaussian(samples.mean(axis=0), samples.var(axis=0, ddof=1))


def chi2_gaussian(p, q):
    """chi^2(p || q) = integral of p^2/q - 1, exact for diagonal Gaussians.

    Finite only when 2/var_p - 1/var_q > 0 in every coordinate; otherwise
    the defining integral diverges and a ValueError is raised.
    """
    a = 1.0 / p.var - 0.5 / q.var
    if np.any(a <= 0):
        raise ValueError("chi2 divergent: need 2/var_p - 1/var_q > 0 in every coordinate")
    b = p.mean / p.var - 0.5 * q.mean / q.var
    c = p.mean ** 2 / p.var - 0.5 * q.mean ** 2 / q.var
    log_ratio = (
        -0.5 * np.log(2.0 * np.pi) - np.log(p.var) + 0.5 * np.log(q.var)
        + 0.5 * (np.log(np.pi) - np.log(a))
        + b * b / a - c
    )
    return float(np.exp(log_ratio.sum()) - 1.0)


def kl_gaussian(p, q):
    """KL(p || q) for diagonal Gaussians."""
    ratio = p.var / q.var
    sq = (p.mean - q.mean) ** 2 / q.var
    return float(0.5 * np.sum(ratio + sq - 1.0 - np.log(ratio)))


def w2_gaussian(p, q):
    """Wasserstein-2 distance between diagonal Gaussians."""
    sq = np.sum((p.mean - q.mean) ** 2) + np.sum((np.sqrt(p.var) - np.sqrt(q.var)) ** 2)
    return float(np.sqrt(sq))


def affine_pushforward(g, scale, shift):
    """Law of diag(scale) X + shift for X ~ g; scale must be nonzero per coordinate."""
    scale = np.asarray(scale, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    if np.any(scale == 0):
        raise ValueError("affine map must be invertible: zero diagonal entry")
    return DiagGaussian(scale * g.mean + shift, scale * scale * g.var)


def energy_distance(x, y):
    """V-statistic energy distance 2 E|x-y| - E|x-x'| - E|y-y'| (all pairs)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(f"samples must be 2-d with equal widths, got {x.shape} and {y.shape}")
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("empty sample set")
    return float(
        2.0 * cdist(x, y).mean() - cdist(x, x).mean() - cdist(y, y).mean()
    )


def _energy_from_distance_matrix(dmat, idx_x, idx_y):
    dxy = dmat[np.ix_(idx_x, idx_y)].mean()
    dxx = dmat[np.ix_(idx_x, idx_x)].mean()
    dyy = dmat[np.ix_(idx_y, idx_y)].mean()
    return 2.0 * dxy - dxx - dyy


def permutation_pvalue(x, y, n_perm, rng):
    """Right-tail p-value of the energy distance under label permutation.

    Pools the samples, recomputes the statistic for ``n_perm`` relabelings
    of the precomputed distance matrix, and returns
    ``(1 + #{permuted >= observed}) / (n_perm + 1)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = x.shape[0], y.shape[0]
    pooled = np.concatenate([x, y], axis=0)
    dmat = cdist(pooled, pooled)
    observed = _energy_from_distance_matrix(dmat, np.arange(n), np.arange(n, n + m))
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(n + m)
        stat = _energy_from_distance_matrix(dmat, perm[:n], perm[n:])
        if stat >= observed:
            hits += 1
    return (1 + hits) / (n_perm + 1)


@dataclass
class DivergenceReport:
    """One theory check: the measured quantity against its bound."""

    name: str
    measured: float
    bound_rhs: float
    passed: bool
    chi2: float = None
    kl: float = None
    w2: float = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: measured={self.measured:.6g} bound={self.bound_rhs:.6g} {status}"


def check_ou_contraction(m_grid, gamma_grid, dim=2, tol=1e-12):
    """One OU step contracts chi^2 toward N(0, I) at rate e^{-2 gamma}.

    For p = N((m, 0, ...), I): chi2(OU_gamma p || q) <= e^{-2 gamma} chi2(p || q),
    checked in closed form over the (m, gamma) grid.
    """
    q = standard_gaussian(dim)
    reports = []
    for m in m_grid:
        mean = np.zeros(dim)
        mean[0] = m
        p = DiagGaussian(mean, np.ones(dim))
        base = chi2_gaussian(p, q)
        for gamma in gamma_grid:
            left = chi2_gaussian(ou_gaussian_marginal(p, gamma), q)
            right = float(np.exp(-2.0 * gamma) * base)
            reports.append(
                DivergenceReport(
                    name=f"ou-contraction m={m:g} gamma={gamma:g}",
                    measured=left,
                    bound_rhs=right,
                    passed=left <= right + tol,
                    chi2=left,
                )
            )
    return reports


def check_initial_diffusion_w2(p, delta_grid, tol=1e-12):
    """Short diffusion moves a law by at most sqrt((M2 + 2d) delta) in W2.

    For a DiagGaussian the distance to its OU image is exact; for a sample
    cloud the synchronous-coupling upper bound
    sqrt((1 - e^{-delta})^2 M2 + (1 - e^{-2 delta}) d) is used instead.
    """
    reports = []
    if isinstance(p, DiagGaussian):
        dim, m2 = p.dim, p.second_moment()

        def distance(delta):
            return w2_gaussian(p, ou_gaussian_marginal(p, delta))
    else:
        samples = np.asarray(p, dtype=np.float64)
        dim = samples.shape[1]
        m2 = float(np.mean(np.sum(samples * samples, axis=1)))

        def distance(delta):
            shrink = -np.expm1(-delta)
            return float(np.sqrt(shrink * shrink * m2 + -np.expm1(-2.0 * delta) * dim))

    c5 = np.sqrt(m2 + 2.0 * dim)
    for delta in delta_grid:
        measured = distance(delta)
        bound = float(c5 * np.sqrt(delta))
        reports.append(
            DivergenceReport(
                name=f"w2-initial-diffusion delta={delta:g}",
                measured=measured,
                bound_rhs=bound,
                passed=measured <= bound + tol,
                w2=measured,
            )
        )
    return reports


def check_bidirectional_dpi(scale, shift, p, q, tol=1e-10):
    """Invertible affine maps leave f-divergences unchanged, both directions.

    Checks KL always and chi^2 whenever both sides converge; the measured
    value is the largest absolute discrepancy.
    """
    tp = affine_pushforward(p, scale, shift)
    tq = affine_pushforward(q, scale, shift)
    gaps = {"kl": abs(kl_gaussian(p, q) - kl_gaussian(tp, tq))}
    try:
        gaps["chi2"] = abs(chi2_gaussian(p, q) - chi2_gaussian(tp, tq))
    except ValueError:
        pass
    measured = max(gaps.values())
    return DivergenceReport(
        name=f"dpi-affine scale={np.asarray(scale).tolist()}",
        measured=measured,
        bound_rhs=0.0,
        passed=measured <= tol,
        chi2=gaps.get("chi2"),
        kl=gaps["kl"],
    )


def render_report(reports):
    """Line-oriented text summary, one check per line."""
    return "\n".join(r.line() for r in reports)
