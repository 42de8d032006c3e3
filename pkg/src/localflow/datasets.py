"""Toy 2D samplers, Gaussian-mixture density oracles, and CSV ingestion.

The mixture class doubles as a ground-truth density for likelihood checks:
sampling is exact and ``logpdf`` is the log-sum-exp of the component
densities.  The 2D samplers are documented generators (polar rose curve and
a 4x4 checkerboard), and the CSV loader standardizes columns by train-split
statistics with a deterministic seeded split.
"""

from dataclasses import dataclass, field

import numpy as np

from .mlp import MlpSpec  # noqa: F401  (re-exported for callers building specs from data)


class DataError(ValueError):
    """Malformed input data (CSV parse or shape problems)."""


@dataclass(frozen=True)
class GaussianMixture:
    """Isotropic-component mixture: weights, component means, shared std."""

    weights: np.ndarray
    means: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        if self.means.ndim != 2:
            raise ValueError(f"means must be (k, d), got shape {self.means.shape}")
        if self.weights.shape != (self.means.shape[0],):
            raise ValueError("one weight per component required")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def dim(self):
        return self.means.shape[1]

    def sample(self, n, rng):
        comp = rng.choice(self.means.shape[0], size=n, p=self.weights)
        return self.means[comp] + self.sigma * rng.standard_normal((n, self.dim))

    def logpdf(self, x):
        """Exact mixture log-density, log-sum-exp stabilized; works on rows."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        d = self.dim
        if xb.shape[1] != d:
            raise ValueError(f"points have dimension {xb.shape[1]}, mixture is {d}-d")
        diff = xb[:, None, :] - self.means[None, :, :]
        sq = np.sum(diff * diff, axis=2)
        log_comp = (
            np.log(self.weights)[None, :]
            - 0.5 * sq / self.sigma ** 2
            - 0.5 * d * np.log(2.0 * np.pi * self.sigma ** 2)
        )
        peak = log_comp.max(axis=1, keepdims=True)
        out = peak[:, 0] + np.log(np.sum(np.exp(log_comp - peak), axis=1))
        return float(out[0]) if single else out


def ring_mixture(n_components=8, radius=1.0, sigma=0.1):
    """Equal-weight components spaced evenly on a circle."""
    angles = 2.0 * np.pi * np.arange(n_components) / n_components
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return GaussianMixture(np.full(n_components, 1.0 / n_components), means, sigma)


def sample_rose(n, petals, noise, rng):
    """Points on the polar curve r = cos(petals * theta) plus isotropic noise.

    Theta is uniform on [0, 2 pi); even ``petals`` yields ``2 * petals``
    lobes.  ``noise`` may be zero for exactly on-curve points.
    """
    if petals < 1:
        raise ValueError(f"petals must be >= 1, got {petals}")
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = np.cos(petals * theta)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    if noise > 0:
        pts = pts + noise * rng.standard_normal((n, 2))
    return pts


# 4x4 alternating cells on [-2, 2]^2; cell (i, j) is occupied when i+j is even
_CHECKER_CELLS = np.array([(i, j) for i in range(4) for j in range(4) if (i + j) % 2 == 0])


def sample_checkerboard(n, rng):
    """Uniform draws from the 8 occupied squares of a 4x4 board on [-2, 2]^2."""
    cells = _CHECKER_CELLS[rng.integers(0, len(_CHECKER_CELLS), size=n)]
    u = rng.uniform(0.0, 1.0, size=(n, 2))
    return -2.0 + (cells + u)


def checkerboard_cell_index(points):
    """Flat 4x4 cell index of each point, for occupancy checks."""
    ij = np.floor(points + 2.0).astype(int)
    ij = np.clip(ij, 0, 3)
    return ij[:, 0] * 4 + ij[:, 1]


@dataclass
class TabularSet:
    """A numeric matrix with a seeded train/test split and train-fit scaler."""

    name: str
    matrix: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    column_means: np.ndarray
    column_stds: np.ndarray
    test_fraction: float
    split_seed: int

    @property
    def dim(self):
        return self.matrix.shape[1]

    def standardize(self, x):
        return (x - self.column_means) / self.column_stds

    def destandardize(self, z):
        return z * self.column_stds + self.column_means

    def train_matrix(self):
        return self.standardize(self.matrix[self.train_idx])

    def test_matrix(self):
        return self.standardize(self.matrix[self.test_idx])


def parse_csv_text(text, has_header):
    """Strict comma-separated numeric parser; errors carry row/column indices.

    Expects UTF-8 text, decimal points, no quoting, optionally one header row.
    Row and column indices in error messages are 1-based and count physical
    lines, header included.
    """
    lines = text.splitlines()
    rows = []
    width = None
    start = 1 if has_header else 0
    if has_header and not lines:
        raise DataError("empty file: missing header row")
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if line.strip() == "":
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(f"ragged row at line {lineno}: expected {width} fields, got {len(cells)}")
        parsed = []
        for col, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataError(f"non-numeric field at line {lineno}, column {col}: {cell.strip()!r}") from None
        rows.append(parsed)
    if not rows:
        raise DataError("no data rows found")
    return np.array(rows, dtype=np.float64)


def load_csv(path, has_header=False, test_fraction=0.1, seed=0, name=None):
    """Load a numeric CSV into a standardized, deterministically split TabularSet."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    with open(path, encoding="utf-8") as fh:
        matrix = parse_csv_text(fh.read(), has_header)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(matrix.shape[0])
    n_test = int(round(test_fraction * matrix.shape[0]))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    if train_idx.size == 0:
        raise DataError("train split is empty; lower test_fraction")
    train = matrix[train_idx]
    means = train.mean(axis=0)
    stds = train.std(axis=0)
    if np.any(stds == 0):
        flat = int(np.where(stds == 0)[0][0]) + 1
        raise DataError(f"column {flat} is constant on the train split; cannot standardize")
    return TabularSet(
        name=name or str(path),
        matrix=matrix,
        train_idx=train_idx,
        test_idx=test_idx,
        column_means=means,
        column_stds=stds,
        test_fraction=test_fraction,
        split_seed=seed,
    )
