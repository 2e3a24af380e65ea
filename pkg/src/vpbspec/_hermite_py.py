"""Pure-numpy implementation of the tensor Hermite evaluation kernels.

Mirrors the compiled ``_hermite_c`` module function for function; the two
are selected between in :mod:`vpbspec.kernels`.
"""
import numpy as np


def hermite_1d(x, K):
    """Normalized probabilists' Hermite polynomials ``He_n(x)/sqrt(n!)``.

    Returns an array of shape ``x.shape + (K+1,)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (K + 1,))
    out[..., 0] = 1.0
    if K >= 1:
        out[..., 1] = x
    for n in range(1, K):
        out[..., n + 1] = (x * out[..., n] - np.sqrt(n) * out[..., n - 1]) / np.sqrt(n + 1)
    return out


def tensor_hermite(points, K, index_map):
    """Polynomial parts of the tensor basis at ``points`` (N, 3) -> (N, dim)."""
    points = np.ascontiguousarray(points, dtype=float)
    idx = np.asarray(index_map, dtype=np.intp)
    h = hermite_1d(points, K)  # (N, 3, K+1)
    return h[:, 0, idx[:, 0]] * h[:, 1, idx[:, 1]] * h[:, 2, idx[:, 2]]


def tensor_hermite_even(center, offset, K, index_map):
    """``H_a(center + offset) + H_a(center - offset)`` for every basis index."""
    center = np.asarray(center, dtype=float)
    offset = np.asarray(offset, dtype=float)
    return (tensor_hermite(center + offset, K, index_map)
            + tensor_hermite(center - offset, K, index_map))
