"""Gaussian sensing matrices and CoSaMP sparse recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import Rng, as_vector, least_squares
from .sparsify import SparseVector, top_k_indices

EARLY_EXIT_TOL = 1e-12


@dataclass(frozen=True)
class SensingMatrix:
    """A ``p x n`` matrix whose entries are i.i.d. N(0, 1/p)."""

    p: int
    n: int
    matrix: np.ndarray
    seed: int | None = None


def make_sensing_matrix(rng: Rng, p: int, n: int) -> SensingMatrix:
    """Draw a Gaussian sensing matrix from ``rng``.

    Draws are consumed in column-major order: column 0 top to bottom, then
    column 1, and so on.
    """
    if p < 1 or n < 1:
        raise ValueError(f"sensing matrix needs positive dimensions, got {p}x{n}")
    g = rng.standard_normal(p * n).reshape(n, p).T
    return SensingMatrix(p, n, np.ascontiguousarray(g) / np.sqrt(p), rng.seed)


def cosamp_iterations(kappa: int) -> int:
    return 6 * (kappa + 1)


def cosamp(psi, kappa: int, y, early_exit: bool = True, history: list | None = None) -> SparseVector:
    """Recover an at-most-``kappa``-sparse ``z`` with ``psi @ z ~= y``.

    Runs the fixed ``6 (kappa + 1)`` CoSaMP iterations. With ``early_exit``
    the loop stops once the residual falls below ``1e-12 ||y||`` or an
    iterate repeats exactly (every later iteration would then repeat it
    too, so the result is unchanged). If
    ``history`` is given, the residual norm after every iteration is
    appended to it.
    """
    a = psi.matrix if isinstance(psi, SensingMatrix) else np.asarray(psi, dtype=np.float64)
    y = as_vector(y, "y")
    p, n = a.shape
    if y.shape[0] != p:
        raise ValueError(f"y has length {y.shape[0]}, sensing matrix has {p} rows")
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if 2 * kappa > n:
        raise ValueError(f"CoSaMP needs 2*kappa <= n, got kappa={kappa}, n={n}")

    y_norm = np.linalg.norm(y)
    z = z_prev = np.zeros(n)
    support = np.empty(0, dtype=np.int64)
    u = y.copy()
    for _ in range(cosamp_iterations(kappa)):
        proxy = a.T @ u
        merged = np.union1d(top_k_indices(proxy, 2 * kappa), support)
        b = np.zeros(n)
        b[merged] = least_squares(a[:, merged], y)
        keep = top_k_indices(b, kappa)
        support = keep[b[keep] != 0]
        z = np.zeros(n)
        z[support] = b[support]
        u = y - a @ z
        res = np.linalg.norm(u)
        if history is not None:
            history.append(res)
        if early_exit and (res <= EARLY_EXIT_TOL * y_norm or np.array_equal(z, z_prev)):
            break
        z_prev = z
    return SparseVector(n, support, z[support])
