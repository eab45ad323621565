"""Seeded sampling and small dense linear algebra.

Vectors and matrices are plain ``float64`` numpy arrays. The helpers here
only validate shapes and finiteness; everything else is numpy/scipy.
"""

from __future__ import annotations

import zlib

import numpy as np
import scipy.linalg

# Relative pivot threshold below which pivoted QR is treated as rank deficient.
RANK_TOL = 1e-10


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array, raising otherwise."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


class Rng:
    """Seeded, splittable random stream.

    ``child(label, index)`` derives an independent stream keyed on the
    master seed, a purpose label and an integer index, so e.g. the noise of
    iteration ``k`` never depends on how many draws earlier iterations made.
    """

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: str, index: int = 0) -> "Rng":
        tag = zlib.crc32(label.encode("utf-8"))
        return Rng(self.seed, self.spawn_key + (tag, int(index)))

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, spawn_key={self.spawn_key})"


def sample_gaussian(rng: Rng, mean: float = 0.0, stddev: float = 1.0, size=None):
    """Draw from N(mean, stddev**2). ``stddev == 0`` returns ``mean`` exactly."""
    if stddev < 0:
        raise ValueError("stddev must be non-negative")
    z = rng.standard_normal(size)
    if stddev == 0:
        return mean + 0.0 * z if size is not None else float(mean)
    out = mean + stddev * z
    return out if size is not None else float(out)


def laplace_inverse_cdf(u, scale: float):
    """Map ``u`` in (-1/2, 1/2) to a zero-mean Laplace(scale) variate."""
    u = np.asarray(u, dtype=np.float64)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(rng: Rng, scale: float, size=None):
    """Zero-mean Laplace draws with density exp(-|x|/scale) / (2 scale).

    Sampled by inverse CDF so every draw consumes exactly one uniform.
    """
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    # random() is on [0, 1); u = -1/2 would map to -inf
    u = np.where(u <= -0.5, np.nextafter(-0.5, 0.0), u)
    x = laplace_inverse_cdf(u, scale)
    return x if size is not None else float(x)


def matvec(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {x.shape}")
    return a @ x


def least_squares(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``min ||a x - y||_2``.

    Pivoted QR is used when ``a`` has full column rank; otherwise the SVD
    based pseudo-inverse solution is returned.
    """
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if a.ndim != 2 or y.ndim != 1:
        raise ValueError("least_squares expects a 2-D matrix and a 1-D vector")
    p, m = a.shape
    if p < 1 or m < 1:
        raise ValueError("least_squares needs a non-empty matrix")
    if y.shape[0] != p:
        raise ValueError(f"dimension mismatch: matrix has {p} rows, rhs has {y.shape[0]}")

    if p >= m:
        q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True, check_finite=False)
        diag = np.abs(np.diag(r))
        if diag[0] > 0 and diag[-1] > RANK_TOL * diag[0]:
            z = scipy.linalg.solve_triangular(r, q.T @ y, check_finite=False)
            x = np.empty(m)
            x[piv] = z
            return x
    x, *_ = np.linalg.lstsq(a, y, rcond=RANK_TOL)
    return x
