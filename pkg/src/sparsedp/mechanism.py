"""Compressive Laplace mechanism for sparse gradients, and a dense baseline.

The sparse mechanism scales a k-sparse vector down by its sensitivity,
measures it with a fresh Gaussian sensing matrix, adds Laplace noise to the
``p`` measurements and reconstructs with CoSaMP. The dense baseline is the
textbook Laplace mechanism applied coordinate-wise to the full gradient.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .numkit import Rng, as_vector, sample_laplace
from .sensing import SensingMatrix, cosamp, make_sensing_matrix
from .sparsify import SparseVector, top_k

SENSITIVITY_MODES = ("paper_absolute", "per_record")
CONTRACT_TOL = 1e-9
DEFAULT_P_FACTOR = 4.0

_AUTO_RE = re.compile(r"^auto(?:\((?P<alpha>[0-9.eE+-]+)\))?$")


class SensitivityError(ValueError):
    """Raised when an input exceeds the bound the noise was calibrated for."""


@dataclass(frozen=True)
class PrivacyConfig:
    epsilon: float
    xi: float
    kappa: int
    p: int | str = "auto"
    sensitivity_mode: str = "paper_absolute"
    n_records: int | None = None
    psi_policy: str = "per_call"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be at least 1, got {self.kappa}")
        if self.sensitivity_mode not in SENSITIVITY_MODES:
            raise ValueError(f"unknown sensitivity mode {self.sensitivity_mode!r}")
        if self.sensitivity_mode == "per_record" and not (self.n_records and self.n_records >= 1):
            raise ValueError("per_record sensitivity needs n_records >= 1")
        if self.psi_policy not in ("per_call", "per_run"):
            raise ValueError(f"unknown psi policy {self.psi_policy!r}")
        parse_p_rule(self.p)

    @property
    def record_factor(self) -> float:
        """1 in paper_absolute mode, 1/n in per_record mode."""
        if self.sensitivity_mode == "per_record":
            return 1.0 / self.n_records
        return 1.0

    def sparse_sensitivity(self) -> float:
        return 2.0 * self.xi * self.kappa * self.record_factor

    def dense_sensitivity(self, n_theta: int) -> float:
        return 2.0 * self.xi * n_theta * self.record_factor

    def validate_for(self, n_theta: int) -> int:
        """Check the config against a model dimension and return the resolved p."""
        if self.kappa > n_theta:
            raise ValueError(f"kappa={self.kappa} exceeds n_theta={n_theta}")
        if 2 * self.kappa > n_theta:
            raise ValueError(f"2*kappa={2 * self.kappa} exceeds n_theta={n_theta}")
        return resolve_p(self.kappa, n_theta, self.p)


@dataclass(frozen=True)
class MechanismOutput:
    value: np.ndarray
    p_used: int
    noise_norm: float | None = None


def parse_p_rule(rule) -> int | float:
    """Return an explicit ``int`` p, or the float factor of an ``auto(a)`` rule."""
    if isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        return int(rule)
    if isinstance(rule, str):
        text = rule.strip().replace(" ", "")
        if text.isdigit():
            return int(text)
        m = _AUTO_RE.match(text)
        if m:
            alpha = float(m.group("alpha")) if m.group("alpha") else DEFAULT_P_FACTOR
            if not alpha > 0:
                raise ValueError("auto(alpha) needs alpha > 0")
            return alpha
    raise ValueError(f"p must be an integer or 'auto(alpha)', got {rule!r}")


def resolve_p(kappa: int, n_theta: int, rule="auto") -> int:
    """Number of measurements: explicit, or ``max(3, 2k, ceil(a k ln(n/k)))``."""
    if not 1 <= kappa <= n_theta:
        raise ValueError(f"kappa must be in [1, {n_theta}], got {kappa}")
    if 2 * kappa > n_theta:
        raise ValueError(f"2*kappa={2 * kappa} exceeds n_theta={n_theta}; no valid p")
    parsed = parse_p_rule(rule)
    if isinstance(parsed, int):
        if parsed < 3:
            raise ValueError(f"p must be at least 3, got {parsed}")
        return parsed
    return max(3, 2 * kappa, math.ceil(parsed * kappa * math.log(n_theta / kappa)))


def measurement_noise_scale(p: int, epsilon: float) -> float:
    """Laplace scale for the normalized measurements: ``sqrt(p) / epsilon``."""
    return math.sqrt(p) / epsilon


def privatize(
    v: SparseVector,
    cfg: PrivacyConfig,
    rng: Rng,
    psi: SensingMatrix | None = None,
    debug_oracle: bool = False,
) -> MechanismOutput:
    """Release an epsilon-DP estimate of the sparse vector ``v``.

    ``rng`` should be a stream dedicated to this call; the sensing matrix
    and the Laplace noise are drawn from separate children of it unless a
    fixed ``psi`` is passed in. ``noise_norm`` is only filled in when
    ``debug_oracle`` is set, since it depends on the unreleased input.
    """
    n = v.dim
    p = cfg.validate_for(n)
    if v.nnz > cfg.kappa:
        raise ValueError(f"input has {v.nnz} nonzeros, more than kappa={cfg.kappa}")
    # checked against 2 xi kappa in both modes; per_record only rescales the noise
    bound = 2.0 * cfg.xi * cfg.kappa
    l1 = float(np.abs(v.values).sum())
    if l1 > bound * (1 + CONTRACT_TOL):
        raise SensitivityError(
            f"sensitivity contract violated: ||v||_1 / (2 xi kappa) = {l1 / bound:.6g} > 1"
        )

    if psi is None:
        psi = make_sensing_matrix(rng.child("psi"), p, n)
    elif psi.p != p or psi.n != n:
        raise ValueError(f"sensing matrix is {psi.p}x{psi.n}, expected {p}x{n}")

    delta = cfg.sparse_sensitivity()
    y = psi.matrix[:, v.indices] @ (v.values / delta)
    scale = measurement_noise_scale(p, cfg.epsilon)
    if scale > 0:
        y = y + sample_laplace(rng.child("laplace"), scale, size=p)
    recovered = cosamp(psi, cfg.kappa, y)
    value = np.zeros(n)
    value[recovered.indices] = delta * recovered.values

    noise_norm = None
    if debug_oracle:
        noise_norm = float(np.linalg.norm(value - v.to_dense()))
    return MechanismOutput(value, p, noise_norm)


def privatize_dense(g, cfg: PrivacyConfig, rng: Rng) -> np.ndarray:
    """Laplace mechanism on the full gradient at l1-sensitivity ``2 xi n_theta``."""
    g = as_vector(g, "gradient")
    if np.max(np.abs(g), initial=0.0) > cfg.xi * (1 + CONTRACT_TOL):
        raise SensitivityError("gradient exceeds the per-coordinate bound xi")
    scale = cfg.dense_sensitivity(g.shape[0]) / cfg.epsilon
    if scale == 0:
        return g.copy()
    return g + sample_laplace(rng.child("laplace"), scale, size=g.shape[0])


def check_adjacent_sensitivity(g_d, g_d_adj, cfg: PrivacyConfig) -> bool:
    """Whether ``||Q(g_d) - Q(g_d_adj)||_1`` fits within the mechanism's sensitivity."""
    a = top_k(g_d, cfg.kappa).to_dense()
    b = top_k(g_d_adj, cfg.kappa).to_dense()
    return float(np.abs(a - b).sum()) / cfg.sparse_sensitivity() <= 1 + CONTRACT_TOL
