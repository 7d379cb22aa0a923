"""Shared oracles for the test suite.

Everything here is deliberately independent of the library's FFT-based
implementations: blur is evaluated tap by tap with np.roll, dense operator
matrices are built from impulses, and adjointness is checked through raw
inner products.
"""

import numpy as np

from hsfuse.cube import HsiCube


def rand_cube(rng, bands, height, width, lo=-1.0, hi=1.0) -> HsiCube:
    return HsiCube(rng.uniform(lo, hi, (bands, height, width)))


def roll_blur(data: np.ndarray, kernel: np.ndarray, anchor: tuple[int, int]) -> np.ndarray:
    """Direct circular correlation: out[i,j] = sum_uv K[u,v] x[i+u-ar, j+v-ac]."""
    ar, ac = anchor
    out = np.zeros_like(data, dtype=np.float64)
    for u in range(kernel.shape[0]):
        for v in range(kernel.shape[1]):
            out += kernel[u, v] * np.roll(data, (-(u - ar), -(v - ac)), axis=(-2, -1))
    return out


def dense_matrix(apply_fn, in_shape, out_shape=None) -> np.ndarray:
    """Materialize a linear map column by column from unit impulses."""
    n = int(np.prod(in_shape))
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(np.asarray(apply_fn(e.reshape(in_shape))).ravel())
    mat = np.stack(cols, axis=1)
    if out_shape is not None:
        assert mat.shape[0] == int(np.prod(out_shape))
    return mat


def adjoint_gap(fwd, adj, in_shape, out_shape, rng) -> float:
    """Relative gap between <A x, y> and <x, A^T y> for one random draw."""
    x = rng.standard_normal(in_shape)
    y = rng.standard_normal(out_shape)
    lhs = float(np.vdot(np.asarray(fwd(x)), y))
    rhs = float(np.vdot(x, np.asarray(adj(y))))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30)


def relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-30)
    return float(np.linalg.norm(a - b)) / denom


def random_srf_matrix(rng, in_bands: int, out_bands: int) -> np.ndarray:
    """Non-negative response rows with a guaranteed positive sum."""
    mat = rng.uniform(0.0, 1.0, (out_bands, in_bands)) ** 2 + 0.05
    return mat
