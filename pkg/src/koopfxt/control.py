"""Lemniscate reference, PD tracking law, and the CBF-QP safety filter."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ControllerError
from .plant import DOUBLE_INTEGRATOR, ControlAffinePlant
from .qp import QpProblem, QpSolution, solve, solve_penalized
from .safety import ObstacleCbf, SafetyConstraint, build_naive, build_robust, build_robust_adaptive

REGIMES = ("nominal", "naive", "robust", "robust_adaptive")


def normalize_regime(name: str) -> str:
    key = name.replace("-", "_")
    if key not in REGIMES:
        raise ConfigurationError(f"unknown regime {name!r}; expected one of {', '.join(REGIMES)}")
    return key


@dataclass(frozen=True)
class Reference:
    """Gerono lemniscate x = A sin(wt), y = A sin(wt) cos(wt)."""

    amplitude: float = 4.0
    omega: float = 0.2 * math.pi

    def at(self, t: float):
        return reference_at(self, t)


def reference_at(ref: Reference, t: float):
    """Return (pos, vel, acc) of the reference at time t."""
    if t < 0:
        raise ConfigurationError("reference time must be nonnegative")
    A, w = ref.amplitude, ref.omega
    s1, c1 = math.sin(w * t), math.cos(w * t)
    s2, c2 = math.sin(2 * w * t), math.cos(2 * w * t)
    pos = np.array([A * s1, 0.5 * A * s2])
    vel = np.array([A * w * c1, A * w * c2])
    acc = np.array([-A * w * w * s1, -2.0 * A * w * w * s2])
    return pos, vel, acc


@dataclass(frozen=True)
class ControllerConfig:
    regime: str = "robust"
    kp: float = 4.0
    kd: float = 4.0
    u_max: Optional[float] = None
    omega: float = 1.0
    use_slack: bool = True
    slack_weight: float = 1e3
    max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "regime", normalize_regime(self.regime))
        if not (self.kp > 0 and self.kd > 0):
            raise ConfigurationError("tracking gains must be positive")
        if self.u_max is not None and not self.u_max > 0:
            raise ConfigurationError("u_max must be positive when given")
        if not self.omega > 0:
            raise ConfigurationError("omega must be positive")


@dataclass
class DisturbanceEstimate:
    d_hat: np.ndarray
    delta: float = 0.0
    delta_dot: float = 0.0
    sigma_max_W: float = 0.0


@dataclass
class ControlDiagnostics:
    u0: np.ndarray
    constraints: list = field(default_factory=list)
    solution: Optional[QpSolution] = None

    @property
    def active_set(self) -> tuple[int, ...]:
        return self.solution.active_set if self.solution else ()

    @property
    def iterations(self) -> int:
        return self.solution.iterations if self.solution else 0

    @property
    def slack(self) -> float:
        if self.solution is None or self.solution.slack is None:
            return 0.0
        return float(np.sum(self.solution.slack))


def nominal_input(cfg: ControllerConfig, ref: Reference, z, t: float) -> np.ndarray:
    """u0 = acc* + kd (vel* - v) + kp (pos* - p), optionally saturated."""
    pos, vel, acc = reference_at(ref, t)
    z = np.asarray(z, dtype=float)
    u0 = acc + cfg.kd * (vel - z[2:4]) + cfg.kp * (pos - z[0:2])
    if cfg.u_max is not None:
        u0 = np.clip(u0, -cfg.u_max, cfg.u_max)
    return u0


def collect_constraints(
    cfg: ControllerConfig,
    z,
    d_est: DisturbanceEstimate,
    obstacles: Sequence[ObstacleCbf],
    plant: ControlAffinePlant = DOUBLE_INTEGRATOR,
) -> list[SafetyConstraint]:
    if cfg.regime == "nominal":
        return []
    out = []
    omega_diag = np.full(len(z), cfg.omega)
    for i, cbf in enumerate(obstacles):
        if cfg.regime == "naive":
            out.append(build_naive(cbf, z, d_est.d_hat, plant, obstacle=i))
        elif cfg.regime == "robust":
            out.append(build_robust(cbf, z, d_est.d_hat, d_est.delta, plant, obstacle=i))
        else:
            out.append(
                build_robust_adaptive(cbf, z, d_est.d_hat, d_est.delta, d_est.delta_dot, omega_diag, plant, obstacle=i)
            )
    return out


def control_step(
    cfg: ControllerConfig,
    ref: Reference,
    z,
    t: float,
    d_est: DisturbanceEstimate,
    obstacles: Sequence[ObstacleCbf],
    plant: ControlAffinePlant = DOUBLE_INTEGRATOR,
) -> tuple[np.ndarray, ControlDiagnostics]:
    u0 = nominal_input(cfg, ref, z, t)
    cons = collect_constraints(cfg, z, d_est, obstacles, plant)
    diag = ControlDiagnostics(u0, cons)
    if not cons:
        return u0, diag
    problem = QpProblem.from_rows(u0, [(c.row, c.rhs) for c in cons])
    sol = solve(problem, cfg.max_iter)
    if not sol.solved:
        if not cfg.use_slack:
            raise ControllerError(f"CBF-QP infeasible at t={t:.4f}", state=z)
        sol = solve_penalized(problem, cfg.slack_weight, cfg.max_iter)
    else:
        sol.slack = np.zeros(problem.n_rows)
    diag.solution = sol
    return sol.u_star, diag
