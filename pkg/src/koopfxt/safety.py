"""Obstacle barrier functions and the affine-in-u constraints built from them.

The obstacle barrier ``h = |p - c|^2 - R^2`` has relative degree two for the
double integrator, so constraints are imposed on the first-order surrogate

    H = hdot + k1 h = 2 (p - c) . v + k1 h.

``H >= 0`` together with ``h(0) >= 0`` keeps ``h >= 0`` (``hdot >= -k1 h``).
Three regimes tighten the condition ``Hdot >= -alpha H`` differently:

* naive: the estimate d_hat is trusted exactly;
* robust: tightened by ``delta(t) * sum_i |dH/dz_i|``;
* robust-adaptive: imposed on ``H_r = H - delta^2 tr(Omega^-1) / 2`` with the
  extra ``tr(Omega^-1) delta deltadot`` term.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .plant import DOUBLE_INTEGRATOR, ControlAffinePlant

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObstacleCbf:
    center: tuple[float, float]
    radius: float
    k1: float = 1.0
    alpha_gain: float = 1.0

    def __post_init__(self):
        if not (self.radius > 0 and self.k1 > 0 and self.alpha_gain > 0):
            raise ConfigurationError("obstacle radius, k1 and alpha_gain must be positive")

    def h(self, z) -> float:
        dx = z[0] - self.center[0]
        dy = z[1] - self.center[1]
        return dx * dx + dy * dy - self.radius**2

    def grad_h(self, z) -> np.ndarray:
        return np.array([2.0 * (z[0] - self.center[0]), 2.0 * (z[1] - self.center[1]), 0.0, 0.0])

    def alpha(self, value: float) -> float:
        return self.alpha_gain * value


@dataclass(frozen=True)
class SafetyConstraint:
    """Encodes ``row . u >= rhs``."""

    row: np.ndarray
    rhs: float
    obstacle: int
    regime: str
    margin: float
    H: float

    def satisfied(self, u, tol: float = 0.0) -> bool:
        return float(self.row @ u) >= self.rhs - tol


def hocbf_surrogate(cbf: ObstacleCbf, z, plant: ControlAffinePlant = DOUBLE_INTEGRATOR):
    """Return (H, grad_H, L_f H) at z."""
    z = np.asarray(z, dtype=float)
    px = z[0] - cbf.center[0]
    py = z[1] - cbf.center[1]
    vx, vy = z[2], z[3]
    h = px * px + py * py - cbf.radius**2
    H = 2.0 * (px * vx + py * vy) + cbf.k1 * h
    grad_H = np.array([2.0 * vx + 2.0 * cbf.k1 * px, 2.0 * vy + 2.0 * cbf.k1 * py, 2.0 * px, 2.0 * py])
    drift_terms = float(grad_H @ plant.f(z))
    return float(H), grad_H, drift_terms


def _base(cbf, z, d_hat, plant):
    z = np.asarray(z, dtype=float)
    H, grad_H, LfH = hocbf_surrogate(cbf, z, plant)
    row = grad_H @ plant.g(z)
    LdH = float(grad_H @ np.asarray(d_hat, dtype=float))
    return H, grad_H, LfH, row, LdH


def build_naive(cbf: ObstacleCbf, z, d_hat, plant: ControlAffinePlant = DOUBLE_INTEGRATOR, obstacle: int = 0):
    H, _, LfH, row, LdH = _base(cbf, z, d_hat, plant)
    rhs = -cbf.alpha(H) - LfH - LdH
    return SafetyConstraint(row, rhs, obstacle, "naive", cbf.h(z), H)


def build_robust(cbf: ObstacleCbf, z, d_hat, delta: float, plant: ControlAffinePlant = DOUBLE_INTEGRATOR, obstacle: int = 0):
    if delta < 0:
        raise ConfigurationError("delta must be nonnegative")
    H, grad_H, LfH, row, LdH = _base(cbf, z, d_hat, plant)
    b_d = delta * float(np.abs(grad_H).sum())
    rhs = -cbf.alpha(H) - LfH - LdH + b_d
    return SafetyConstraint(row, rhs, obstacle, "robust", cbf.h(z), H)


def build_robust_adaptive(
    cbf: ObstacleCbf,
    z,
    d_hat,
    delta: float,
    delta_dot: float,
    omega_diag,
    plant: ControlAffinePlant = DOUBLE_INTEGRATOR,
    obstacle: int = 0,
):
    if delta < 0:
        raise ConfigurationError("delta must be nonnegative")
    omega_diag = np.asarray(omega_diag, dtype=float)
    if not omega_diag.min() > 0:
        raise ConfigurationError("Omega must be positive definite")
    H, grad_H, LfH, row, LdH = _base(cbf, z, d_hat, plant)
    tr_inv = float((1.0 / omega_diag).sum())
    h_r = H - 0.5 * delta * delta * tr_inv
    if h_r < 0:
        log.warning("state outside the robust-adaptive safe set: obstacle %d, h_r = %.4g", obstacle, h_r)
    b_d = delta * float(np.abs(grad_H).sum())
    r = tr_inv * delta * delta_dot + b_d
    rhs = -cbf.alpha(h_r) - LfH - LdH + r
    return SafetyConstraint(row, rhs, obstacle, "robust_adaptive", cbf.h(z), H)


def min_barrier(h_log) -> float:
    """Minimum barrier value over a run; ``h_log`` is (steps, obstacles)."""
    h = np.asarray(h_log, dtype=float)
    if h.size == 0:
        raise ValueError("empty barrier log")
    return float(h.min())
