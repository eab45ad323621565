"""Private projected gradient descent and the matching performance bound."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .mechanism import PrivacyConfig, privatize, privatize_dense
from .models import ModelSpec, ParamDomain
from .numkit import Rng
from .sensing import make_sensing_matrix
from .sparsify import top_k

MODES = ("sparsified", "dense_laplace", "noiseless")


class NumericalAbort(RuntimeError):
    """Training produced a non-finite iterate."""


@dataclass(frozen=True)
class StepRule:
    """``c / sqrt(k)`` with either an explicit ``c`` or the bound-derived choice.

    ``kind="theorem_default"`` derives ``c`` from the bound parameters:
    ``D / (sqrt(2) G)`` for ``variant="sqrt2"`` or ``D / (2 G)`` for
    ``variant="half"``.
    """

    kind: str = "c_over_sqrt_k"
    c: float = 0.1
    variant: str = "sqrt2"

    def __post_init__(self):
        if self.kind not in ("c_over_sqrt_k", "theorem_default"):
            raise ValueError(f"unknown step rule {self.kind!r}")
        if self.kind == "c_over_sqrt_k" and not self.c > 0:
            raise ValueError("step constant c must be positive")
        if self.variant not in ("sqrt2", "half"):
            raise ValueError(f"unknown theorem step variant {self.variant!r}")


@dataclass(frozen=True)
class BoundParams:
    diameter: float
    xi: float
    kappa: int
    n_theta: int
    epsilon: float
    T: int
    C: float = 1.0

    def __post_init__(self):
        if not (self.diameter > 0 and self.xi > 0 and self.epsilon > 0):
            raise ValueError("diameter, xi and epsilon must be positive")
        if self.C < 0:
            raise ValueError("C must be non-negative")
        if self.T < 1 or self.kappa < 1 or self.n_theta < 1:
            raise ValueError("T, kappa and n_theta must be positive")
        if self.kappa > self.n_theta:
            raise ValueError("kappa cannot exceed n_theta")


def gradient_bound(bp: BoundParams) -> float:
    """G, the bound on the root second moment of the privatized gradient."""
    log_term = math.log(bp.n_theta / bp.kappa)
    return bp.xi * math.sqrt(bp.kappa * (1 + bp.C * bp.kappa**3 * log_term**2 / bp.epsilon**2))


def noise_bound(bp: BoundParams) -> float:
    """W, the bound on the root second moment of the mechanism noise."""
    return math.sqrt(bp.C) * bp.xi * bp.kappa**2 * math.log(bp.n_theta / bp.kappa) / bp.epsilon


def step_size(rule: StepRule, k: int, bound: BoundParams | None = None) -> float:
    if k < 1:
        raise ValueError("iteration index starts at 1")
    if rule.kind == "c_over_sqrt_k":
        c = rule.c
    else:
        if bound is None:
            raise ValueError("theorem_default step needs bound parameters")
        denom = math.sqrt(2) if rule.variant == "sqrt2" else 2.0
        c = bound.diameter / (denom * gradient_bound(bound))
    return c / math.sqrt(k)


def bound_components(bp: BoundParams) -> tuple[float, float, float]:
    """The three additive terms of the bound, each including ``D xi (2 + ln T)``.

    In order: the optimization-rate term, the sparsification-bias term and
    the privacy-noise term.
    """
    if bp.kappa >= bp.n_theta:
        raise ValueError("bound is only stated for kappa < n_theta")
    scale = bp.diameter * bp.xi * (2 + math.log(bp.T))
    log_term = math.log(bp.n_theta / bp.kappa)
    rate = math.sqrt(2 / bp.T) * math.sqrt(bp.kappa * (1 + bp.C * bp.kappa**3 * log_term**2 / bp.epsilon**2))
    bias = math.sqrt(2 * (bp.n_theta - bp.kappa))
    noise = math.sqrt(bp.C) * bp.kappa**2 * log_term / bp.epsilon
    return scale * rate, scale * bias, scale * noise


def suboptimality_bound(bp: BoundParams) -> float:
    """Upper bound on expected suboptimality of the last iterate."""
    return sum(bound_components(bp))


@dataclass(frozen=True)
class TrainConfig:
    T: int
    domain: ParamDomain
    theta_init: np.ndarray
    mode: str = "sparsified"
    privacy: PrivacyConfig | None = None
    xi: float | None = None
    sparsity: int | None = None
    step: StepRule = StepRule()
    master_seed: int = 0
    project: bool = True
    debug_oracle: bool = False
    bound_constant: float = 1.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != "noiseless" and self.privacy is None:
            raise ValueError(f"mode {self.mode} needs a privacy config")
        theta = np.asarray(self.theta_init, dtype=np.float64)
        object.__setattr__(self, "theta_init", theta)
        if theta.shape != self.domain.center.shape:
            raise ValueError("theta_init and domain dimensions differ")
        if self.project and not self.domain.contains(theta):
            raise ValueError("theta_init lies outside the parameter domain")

    @property
    def clip(self) -> float | None:
        """Per-coordinate clipping level: the privacy xi, else ``xi`` if given."""
        return self.privacy.xi if self.privacy is not None else self.xi

    @property
    def kappa(self) -> int | None:
        return self.privacy.kappa if self.privacy is not None else self.sparsity

    def bound_params(self, n_theta: int) -> BoundParams:
        if self.privacy is None:
            raise ValueError("bound parameters need a privacy config")
        return BoundParams(
            self.domain.diameter, self.privacy.xi, self.privacy.kappa, n_theta,
            self.privacy.epsilon, self.T, self.bound_constant,
        )


@dataclass
class RunRecord:
    """Per-iterate metrics; row ``k`` describes ``theta[k]`` for k = 1..T."""

    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    COLUMNS = ("k", "loss", "rel_loss", "grad_norm", "noise_norm", "wall_time")

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    @property
    def final_loss(self) -> float:
        return self.rows[-1]["loss"]

    @property
    def final_rel_loss(self) -> float:
        return self.rows[-1]["rel_loss"]


def relative_loss(f: float, f_star: float) -> float:
    return f / f_star - 1.0 if f_star > 0 else math.nan


def train(spec: ModelSpec, dataset, cfg: TrainConfig, theta_star: np.ndarray | None = None):
    """Run ``T - 1`` privatized projected gradient steps from ``cfg.theta_init``.

    Each step sparsifies the clipped full-batch gradient (sparsified and,
    when a kappa is configured, noiseless modes), privatizes it, takes a
    ``c / sqrt(k)`` step and projects back onto the domain. The regularizer
    gradient is data-independent and is added after privatization.

    Returns the last iterate and a :class:`RunRecord`.
    """
    n_theta = spec.n_theta
    if cfg.theta_init.shape[0] != n_theta:
        raise ValueError(f"theta_init has length {cfg.theta_init.shape[0]}, model needs {n_theta}")
    p_used = None
    if cfg.mode == "sparsified":
        p_used = cfg.privacy.validate_for(n_theta)
    kappa = cfg.kappa if cfg.mode != "dense_laplace" else None
    if kappa is not None and not 1 <= kappa <= n_theta:
        raise ValueError(f"kappa must be in [1, {n_theta}]")
    bound = None
    if cfg.step.kind == "theorem_default":
        bound = cfg.bound_params(n_theta)

    if theta_star is None:
        theta_star = models.solve_optimum(spec, dataset, cfg.domain)
    f_star = models.loss(spec, dataset, theta_star)

    master = Rng(cfg.master_seed)
    fixed_psi = None
    if cfg.mode == "sparsified" and cfg.privacy.psi_policy == "per_run":
        fixed_psi = make_sensing_matrix(master.child("psi_run"), p_used, n_theta)

    record = RunRecord(meta={
        "mode": cfg.mode,
        "model": spec.kind,
        "n_theta": n_theta,
        "n_records": dataset.n,
        "T": cfg.T,
        "master_seed": cfg.master_seed,
        "step_rule": cfg.step.kind,
        "step_c": cfg.step.c if cfg.step.kind == "c_over_sqrt_k" else None,
        "projected": cfg.project,
        "domain_diameter": cfg.domain.diameter,
        "clip_xi": cfg.clip,
        "kappa": kappa,
        "p": p_used,
        "f_star": f_star,
    })
    if cfg.privacy is not None and cfg.mode != "noiseless":
        record.meta.update({
            "epsilon_per_iteration": cfg.privacy.epsilon,
            "epsilon_naive_total": cfg.privacy.epsilon * max(cfg.T - 1, 0),
            "sensitivity_mode": cfg.privacy.sensitivity_mode,
            "psi_policy": cfg.privacy.psi_policy,
        })

    theta = cfg.theta_init.copy()
    start = time.perf_counter()
    for k in range(1, cfg.T + 1):
        f = models.loss(spec, dataset, theta)
        g_data = models.data_gradient(spec, dataset, theta, cfg.clip)
        g_reg = models.regularizer_gradient(spec, theta)
        g = g_data + g_reg
        row = {
            "k": k,
            "loss": f,
            "rel_loss": relative_loss(f, f_star),
            "grad_norm": float(np.linalg.norm(g)),
            "noise_norm": None,
            "wall_time": 0.0,
        }
        if k < cfg.T:
            clean, noisy = _privatized_direction(cfg, g_data, kappa, master.child("iteration", k), fixed_psi)
            if cfg.debug_oracle:
                row["noise_norm"] = float(np.linalg.norm(noisy - clean))
            theta = theta - step_size(cfg.step, k, bound) * (noisy + g_reg)
            if cfg.project:
                theta = models.project(cfg.domain, theta)
            if not np.all(np.isfinite(theta)):
                raise NumericalAbort(f"non-finite parameter at iteration {k + 1}")
        row["wall_time"] = time.perf_counter() - start
        record.rows.append(row)
    return theta, record


def _privatized_direction(cfg: TrainConfig, g_data, kappa, rng: Rng, psi):
    """Return (the noise-free direction, the released direction) for one step."""
    if cfg.mode == "dense_laplace":
        return g_data, privatize_dense(g_data, cfg.privacy, rng)
    if kappa is None:
        return g_data, g_data
    sparse = top_k(g_data, kappa)
    clean = sparse.to_dense()
    if cfg.mode == "noiseless":
        return clean, clean
    out = privatize(sparse, cfg.privacy, rng, psi=psi)
    return clean, out.value
