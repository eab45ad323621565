"""Quick invariant checks behind ``sparsedp selftest``.

These are small-sized versions of the property tests in the test suite,
meant to confirm an installation works; they take a few seconds.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .dataio import synthesize_regression
from .mechanism import PrivacyConfig, check_adjacent_sensitivity, privatize, resolve_p
from .models import ModelSpec, ParamDomain, gradient, loss, project
from .numkit import Rng, least_squares, sample_laplace
from .sensing import cosamp, make_sensing_matrix
from .sparsify import SparseVector, top_k
from .trainer import BoundParams, bound_components


def check_top_k_optimal() -> bool:
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        kappa = int(rng.integers(1, min(3, n) + 1))
        v = rng.standard_normal(n)
        best = min(
            float(np.sum(np.delete(v, list(s)) ** 2))
            for s in itertools.combinations(range(n), kappa)
        )
        if abs(float(np.sum((top_k(v, kappa).to_dense() - v) ** 2)) - best) > 1e-12:
            return False
    return True


def check_cosamp_noiseless() -> bool:
    ok = 0
    for trial in range(20):
        rng = Rng(1000 + trial)
        psi = make_sensing_matrix(rng.child("psi"), 32, 64)
        idx = np.sort(np.random.default_rng(trial).choice(64, 3, replace=False))
        v = np.zeros(64)
        v[idx] = rng.child("v").standard_normal(3)
        v /= np.linalg.norm(v)
        z = cosamp(psi, 3, psi.matrix @ v).to_dense()
        ok += np.linalg.norm(z - v) <= 1e-6
    return ok >= 18


def check_laplace_moments() -> bool:
    x = sample_laplace(Rng(5), 2.0, size=100_000)
    return abs(np.mean(np.abs(x)) - 2.0) < 0.06 and abs(np.var(x) - 8.0) < 0.4


def check_least_squares() -> bool:
    a = np.random.default_rng(3).standard_normal((20, 6))
    y = np.random.default_rng(4).standard_normal(20)
    x = least_squares(a, y)
    return np.linalg.norm(a.T @ (a @ x - y)) <= 1e-8 * np.linalg.norm(a.T @ y)


def check_sensitivity_premise() -> bool:
    cfg = PrivacyConfig(1.0, 1.0, 5)
    rng = np.random.default_rng(6)
    return all(
        check_adjacent_sensitivity(np.clip(rng.standard_normal(64), -1, 1),
                                   np.clip(rng.standard_normal(64), -1, 1), cfg)
        for _ in range(200)
    )


def check_mechanism_near_noiseless() -> bool:
    cfg = PrivacyConfig(1e6, 1.0, 5)
    v = SparseVector(64, [3, 10, 22, 40, 61], [0.9, -0.4, 0.7, -0.2, 0.5])
    good = 0
    for k in range(10):
        out = privatize(v, cfg, Rng(7).child("it", k))
        good += np.linalg.norm(out.value - v.to_dense()) <= 1e-3 * np.linalg.norm(v.values)
    return good >= 9 and resolve_p(5, 64, "auto(4)") == 51


def check_gradient_fd() -> bool:
    ds, _ = synthesize_regression(Rng(8), 40, 5, 0.5, 2.0)
    spec = ModelSpec("linear_regression", 5)
    theta = np.random.default_rng(9).standard_normal(5)
    g = gradient(spec, ds, theta, None)
    h = 1e-6
    fd = np.array([
        (loss(spec, ds, theta + h * e) - loss(spec, ds, theta - h * e)) / (2 * h)
        for e in np.eye(5)
    ])
    return np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


def check_bound_terms() -> bool:
    bp = BoundParams(1.0, 1.0, 5, 64, 1.0, 1000, 1.0)
    _, bias, noise = bound_components(bp)
    _, _, noise2 = bound_components(BoundParams(1.0, 1.0, 5, 64, 2.0, 1000, 1.0))
    expected_bias = math.sqrt(2 * 59) * (2 + math.log(1000))
    return math.isclose(bias, expected_bias, rel_tol=1e-12) and math.isclose(noise2, noise / 2, rel_tol=1e-12)


def check_projection() -> bool:
    dom = ParamDomain(np.zeros(2), 2.0)
    return np.allclose(project(dom, [3.0, 4.0]), [0.6, 0.8])


CHECKS = [
    ("top-k matches brute-force best support", check_top_k_optimal),
    ("least squares normal equations", check_least_squares),
    ("Laplace mean |x| and variance", check_laplace_moments),
    ("CoSaMP noiseless recovery", check_cosamp_noiseless),
    ("mechanism near-noiseless recovery", check_mechanism_near_noiseless),
    ("clipped gradients meet the sensitivity premise", check_sensitivity_premise),
    ("gradient vs finite differences", check_gradient_fd),
    ("ball projection", check_projection),
    ("bound components", check_bound_terms),
]


def run_all(out=print) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        ok = bool(fn())
        ok_all &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}")
    return ok_all
