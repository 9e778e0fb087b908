"""Synthetic data generation and error metrics.

Ground truth is a rank-r sum of outer products with i.i.d. standard normal
factors and weights, corrupted by Gaussian noise.  The observed set has
floor(I_plus * I3 * ln(I_times) / 5) entries sampled uniformly without
replacement, split into train/validation; testing uses the unobserved
entries of the clean tensor.  Natural log is a documented choice; the count
rule is overridable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .splr import SplrOperator
from .tensors import DenseTensor3, Shape3, SparseTensor3

__all__ = ["SynthSpec", "default_obs_count", "synth_generate", "rmse", "test_rmse"]


def default_obs_count(shape: Shape3) -> int:
    """floor(I_plus * I3 * ln(I_times) / 5)."""
    return int(shape.sum * shape.dims[2] * np.log(shape.size) / 5)


@dataclass(frozen=True)
class SynthSpec:
    shape: Shape3
    rank: int = 5
    noise_std: float = 0.1
    obs_count: int | None = None  # None -> default_obs_count
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        n = self.obs_count if self.obs_count is not None else default_obs_count(self.shape)
        if n > self.shape.size:
            raise ConfigError(
                f"observation count {n} exceeds tensor size {self.shape.size}"
            )
        if n < 2:
            raise ConfigError("need at least 2 observations to split")


def synth_generate(spec: SynthSpec):
    """Returns (train, val, ground_truth, observed_linear_indices).

    ``train`` and ``val`` carry noisy values; ``ground_truth`` is the clean
    dense tensor; the index array locates all observed entries in the
    canonical linearization (for building the test mask).
    """
    rng = np.random.default_rng(spec.seed)
    I1, I2, I3 = spec.shape.dims
    r = spec.rank
    A = rng.standard_normal((I1, r))
    B = rng.standard_normal((I2, r))
    C = rng.standard_normal((I3, r))
    s = rng.standard_normal(r)
    clean = np.einsum("r,ir,jr,kr->ijk", s, A, B, C)
    ground_truth = DenseTensor3.from_array(clean)

    n = spec.obs_count if spec.obs_count is not None else default_obs_count(spec.shape)
    lin = rng.choice(spec.shape.size, size=n, replace=False)
    i1 = lin % I1
    i2 = (lin // I1) % I2
    i3 = lin // (I1 * I2)
    noisy = clean[i1, i2, i3] + spec.noise_std * rng.standard_normal(n)

    perm = rng.permutation(n)
    n_train = int(round(spec.train_fraction * n))
    tr, va = perm[:n_train], perm[n_train:]
    train = SparseTensor3(spec.shape, i1[tr], i2[tr], i3[tr], noisy[tr])
    val = SparseTensor3(spec.shape, i1[va], i2[va], i3[va], noisy[va])
    return train, val, ground_truth, np.sort(lin)


def rmse(x, ref: SparseTensor3) -> float:
    """||P_S(X - ref)||_F / sqrt(|S|) on ref's index set.

    ``x`` may be a factor-form :class:`SplrOperator`, a dense tensor, or a
    plain 3-d array.
    """
    if ref.nnz == 0:
        raise ShapeError("reference index set is empty")
    if isinstance(x, SplrOperator):
        pred = x.eval_entries(ref.i1, ref.i2, ref.i3)
    else:
        arr = x.as_array() if isinstance(x, DenseTensor3) else np.asarray(x)
        if arr.shape != ref.shape.dims:
            raise ShapeError(f"shape mismatch: {arr.shape} vs {ref.shape.dims}")
        pred = arr[ref.i1, ref.i2, ref.i3]
    return float(np.linalg.norm(pred - ref.values) / np.sqrt(ref.nnz))


def test_rmse(x, ground_truth: DenseTensor3, observed_lin: np.ndarray) -> float:
    """RMSE against the clean tensor on its unobserved entries."""
    shape = ground_truth.shape
    mask = np.ones(shape.size, dtype=bool)
    mask[observed_lin] = False
    lin = np.flatnonzero(mask)
    I1, I2, _ = shape.dims
    i1 = lin % I1
    i2 = (lin // I1) % I2
    i3 = lin // (I1 * I2)
    ref = SparseTensor3(shape, i1, i2, i3, ground_truth.values[lin])
    return rmse(x, ref)
