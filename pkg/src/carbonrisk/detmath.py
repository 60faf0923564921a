"""Shape-stable batched linear algebra.

BLAS matmul kernels can round differently depending on the batch dimension,
which breaks bit-reproducibility when paths are partitioned across workers.
These helpers accumulate over the (small) sector dimension in a fixed order
with elementwise operations, so a path's result never depends on how many
other paths share its batch.
"""

import numpy as np


def batch_mat(x, m):
    """Rows of x (batch, k) times m.T (k, n) -> (batch, n), fixed-order sum."""
    m = np.asarray(m)
    out = x[:, 0:1] * m[:, 0][None, :]
    for j in range(1, m.shape[1]):
        out = out + x[:, j:j + 1] * m[:, j][None, :]
    return out


def batch_dot(x, v):
    """Rows of x (batch, k) dotted with v (k,) -> (batch,), fixed-order sum."""
    v = np.asarray(v)
    out = x[:, 0] * v[0]
    for j in range(1, v.shape[0]):
        out = out + x[:, j] * v[j]
    return out
