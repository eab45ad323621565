"""Convex models: squared-loss linear regression and the hinge-loss linear SVM.

Losses average a per-sample term over the dataset and add a regularizer.
Gradients clip every per-sample loss-gradient coordinate to ``[-xi, xi]``
before averaging, which is what makes the privacy mechanisms' sensitivity
bound hold on arbitrary data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .numkit import as_vector

MODEL_KINDS = ("linear_regression", "linear_svm")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    n_features: int
    reg_strength: float = 0.5

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.n_features < 1:
            raise ValueError("n_features must be positive")
        if self.reg_strength < 0:
            raise ValueError("reg_strength must be non-negative")

    @property
    def n_theta(self) -> int:
        # the SVM carries a bias term
        return self.n_features + (1 if self.kind == "linear_svm" else 0)

    @property
    def has_regularizer(self) -> bool:
        return self.kind == "linear_svm" and self.reg_strength > 0


@dataclass(frozen=True)
class ParamDomain:
    """Euclidean ball of diameter ``diameter`` around ``center``."""

    center: np.ndarray
    diameter: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, "center"))
        if not self.diameter > 0:
            raise ValueError("diameter must be positive")

    @classmethod
    def ball(cls, dim: int, diameter: float) -> "ParamDomain":
        return cls(np.zeros(dim), diameter)

    @property
    def radius(self) -> float:
        return self.diameter / 2.0

    def contains(self, theta, tol: float = 1e-9) -> bool:
        return bool(np.linalg.norm(theta - self.center) <= self.radius + tol)


def design_matrix(spec: ModelSpec, dataset) -> np.ndarray:
    x = np.asarray(dataset.features, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("dataset is empty")
    if x.shape[1] != spec.n_features:
        raise ValueError(f"dataset has {x.shape[1]} features, model expects {spec.n_features}")
    if spec.kind == "linear_svm":
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    return x


def _check_theta(spec: ModelSpec, theta) -> np.ndarray:
    theta = as_vector(theta, "theta")
    if theta.shape[0] != spec.n_theta:
        raise ValueError(f"theta has length {theta.shape[0]}, model needs {spec.n_theta}")
    return theta


def loss(spec: ModelSpec, dataset, theta) -> float:
    theta = _check_theta(spec, theta)
    x = design_matrix(spec, dataset)
    y = np.asarray(dataset.targets, dtype=np.float64)
    margin = x @ theta
    if spec.kind == "linear_regression":
        return float(np.mean((y - margin) ** 2))
    hinge = np.maximum(0.0, 1.0 - y * margin)
    return float(spec.reg_strength * theta @ theta + np.mean(hinge))


def per_sample_gradients(spec: ModelSpec, x: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Row i is the gradient of the i-th loss term (regularizer excluded)."""
    margin = x @ theta
    if spec.kind == "linear_regression":
        return (2.0 * (margin - y))[:, None] * x
    # subgradient 0 at margin exactly 1
    active = (y * margin) < 1.0
    return np.where(active, -y, 0.0)[:, None] * x


def data_gradient(spec: ModelSpec, dataset, theta, xi: float | None) -> np.ndarray:
    """Average of per-sample loss gradients, each coordinate clipped to ``[-xi, xi]``.

    ``xi=None`` disables clipping.
    """
    theta = _check_theta(spec, theta)
    x = design_matrix(spec, dataset)
    y = np.asarray(dataset.targets, dtype=np.float64)
    per = per_sample_gradients(spec, x, y, theta)
    if xi is not None:
        if not xi > 0:
            raise ValueError("xi must be positive")
        np.clip(per, -xi, xi, out=per)
    return per.mean(axis=0)


def regularizer_gradient(spec: ModelSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if spec.has_regularizer:
        return 2.0 * spec.reg_strength * theta
    return np.zeros_like(theta)


def gradient(spec: ModelSpec, dataset, theta, xi: float | None) -> np.ndarray:
    """Full-batch (sub)gradient with per-sample clipping; the regularizer is never clipped."""
    return data_gradient(spec, dataset, theta, xi) + regularizer_gradient(spec, theta)


def project(domain: ParamDomain, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != domain.center.shape:
        raise ValueError("theta and domain dimensions differ")
    offset = theta - domain.center
    dist = np.linalg.norm(offset)
    if dist <= domain.radius:
        return theta.copy()
    return domain.center + offset * (domain.radius / dist)


def _polish(spec, dataset, domain, theta, step, max_steps=10_000, rel_tol=1e-12):
    """Projected full-gradient descent, stopped once the relative decrease stalls."""
    best = theta
    f_best = loss(spec, dataset, theta)
    for _ in range(max_steps):
        cand = project(domain, best - step * gradient(spec, dataset, best, None))
        f_cand = loss(spec, dataset, cand)
        if f_cand >= f_best:
            break
        decrease = (f_best - f_cand) / max(abs(f_best), np.finfo(float).tiny)
        best, f_best = cand, f_cand
        if decrease < rel_tol:
            break
    return best


def _svm_dual_start(spec: ModelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # max_a sum(a) - ||X^T (a*y)||^2 / (4 lam), 0 <= a_i <= 1/n; theta = X^T (a*y) / (2 lam)
    n = x.shape[0]
    lam = spec.reg_strength
    xy = x * y[:, None]

    def neg_dual(a):
        w = xy.T @ a
        return w @ w / (4 * lam) - a.sum(), xy @ w / (2 * lam) - 1.0

    res = scipy.optimize.minimize(
        neg_dual,
        np.full(n, 0.5 / n),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, 1.0 / n)] * n,
        options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12},
    )
    return xy.T @ res.x / (2 * lam)


def solve_optimum(spec: ModelSpec, dataset, domain: ParamDomain) -> np.ndarray:
    """Non-private minimizer of the loss over ``domain`` (no clipping)."""
    x = design_matrix(spec, dataset)
    y = np.asarray(dataset.targets, dtype=np.float64)
    n = x.shape[0]
    sigma_max = np.linalg.norm(x, 2)
    if spec.kind == "linear_regression":
        theta, *_ = np.linalg.lstsq(x, y, rcond=None)
        lipschitz = 2.0 * sigma_max**2 / n
    elif spec.reg_strength > 0:
        theta = _svm_dual_start(spec, x, y)
        lipschitz = 2.0 * spec.reg_strength + sigma_max / np.sqrt(n)
    else:
        theta = np.zeros(spec.n_theta)
        lipschitz = sigma_max / np.sqrt(n)
    theta = project(domain, theta)
    return _polish(spec, dataset, domain, theta, 1.0 / lipschitz)
