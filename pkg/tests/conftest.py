import numpy as np
import pytest

from nort.tensors import FactorPair, Shape3, SparseTensor3


def random_factor(rng, shape, mode, rank):
    nrows, ncols = shape.mode_dims(mode)
    return FactorPair(mode, rng.standard_normal((nrows, rank)),
                      rng.standard_normal((ncols, rank)))


def random_sparse(rng, shape, nnz, values=None):
    lin = rng.choice(shape.size, size=min(nnz, shape.size), replace=False)
    I1, I2, _ = shape.dims
    i1 = lin % I1
    i2 = (lin // I1) % I2
    i3 = lin // (I1 * I2)
    vals = rng.standard_normal(lin.size) if values is None else values
    return SparseTensor3(shape, i1, i2, i3, vals)


def random_obs_from(rng, dense_arr, nnz, noise_std=0.0):
    shape = Shape3(dense_arr.shape)
    lin = rng.choice(shape.size, size=nnz, replace=False)
    I1, I2, _ = shape.dims
    i1 = lin % I1
    i2 = (lin // I1) % I2
    i3 = lin // (I1 * I2)
    vals = dense_arr[i1, i2, i3] + noise_std * rng.standard_normal(nnz)
    return SparseTensor3(shape, i1, i2, i3, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
