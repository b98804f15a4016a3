"""Small dense QP: minimize 1/2 |u - u0|^2 subject to rows a_i . u >= b_i.

Active-set iteration in the Goldfarb-Idnani form: start at the unconstrained
minimizer u0, repeatedly pick the most violated row and move along its
projection onto the null space of the active rows, dropping rows whose
multipliers would turn negative. Every iterate is the exact minimizer over
its active set, so the method terminates after finitely many changes and
proves infeasibility when a violated row lies in the cone of active rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, SolverFailureError

RANK_TOL = 1e-10
MAX_ITER = 100


@dataclass(frozen=True)
class QpProblem:
    u0: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float).reshape(-1)
        m = u0.size
        A = np.asarray(self.A, dtype=float).reshape(-1, m) if np.size(self.A) else np.zeros((0, m))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if m < 1:
            raise ConfigurationError("QP needs at least one variable")
        if A.shape[0] != b.size:
            raise ConfigurationError("row count mismatch between A and b")
        scale = 1.0 + max(np.abs(u0).max(), np.abs(b).max(initial=0.0), np.abs(A).max(initial=0.0))
        # a NaN or inf anywhere propagates into the max
        if not np.isfinite(scale):
            raise ConfigurationError("QP data must be finite")
        object.__setattr__(self, "_scale", float(scale))
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_rows(cls, u0, rows: Sequence[tuple[Sequence[float], float]]) -> "QpProblem":
        u0 = np.asarray(u0, dtype=float)
        if not rows:
            return cls(u0, np.zeros((0, u0.size)), np.zeros(0))
        return cls(u0, np.array([r for r, _ in rows], dtype=float), np.array([c for _, c in rows], dtype=float))

    @property
    def m(self) -> int:
        return self.u0.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def scale(self) -> float:
        """1 + largest absolute entry of (u0, A, b)."""
        return self._scale


@dataclass
class QpSolution:
    u_star: np.ndarray
    status: str
    active_set: tuple[int, ...] = ()
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = 0.0
    iterations: int = 0
    certificate: Optional[np.ndarray] = None
    slack: Optional[np.ndarray] = None

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def kkt_residual(p: QpProblem, u, lam) -> float:
    """Max of stationarity, primal/dual feasibility and complementarity violations.

    Normalized by ``p.scale()`` so the figure is comparable across problem sizes.
    """
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    slack = p.A @ u - p.b if p.n_rows else np.zeros(0)
    stat = u - p.u0 - (p.A.T @ lam if p.n_rows else 0.0)
    scale = p.scale()
    worst = max(
        np.abs(stat).max(initial=0.0),
        -slack.min(initial=0.0),
        -lam.min(initial=0.0),
        np.abs(lam * slack).max(initial=0.0) / scale,
    )
    return float(worst / scale)


def solve(p: QpProblem, max_iter: int = MAX_ITER) -> QpSolution:
    A, b = p.A, p.b
    x = p.u0.copy()
    lam = np.zeros(p.n_rows)
    active: list[int] = []
    tol = 1e-12 * p.scale()
    iters = 0
    while True:
        if p.n_rows == 0:
            break
        s = A @ x - b
        s[active] = 0.0
        q = int(np.argmin(s))
        if s[q] >= -tol:
            break
        # add row q, possibly after dropping blocking rows
        lam_q = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                raise SolverFailureError(f"active-set iteration cap {max_iter} exceeded")
            nq = A[q]
            if active:
                Na = A[active]
                r, *_ = np.linalg.lstsq(Na.T, nq, rcond=RANK_TOL)
                z = nq - Na.T @ r
            else:
                r = np.zeros(0)
                z = nq.copy()
            t1, k_drop = np.inf, -1
            for j, rj in enumerate(r):
                if rj > RANK_TOL:
                    tj = lam[active[j]] / rj
                    if tj < t1:
                        t1, k_drop = tj, j
            zz = float(z @ z)
            t2 = (b[q] - nq @ x) / zz if zz > RANK_TOL * max(1.0, float(nq @ nq)) else np.inf
            if not np.isfinite(t1) and not np.isfinite(t2):
                cert = np.zeros(p.n_rows)
                cert[q] = 1.0
                for j, idx in enumerate(active):
                    cert[idx] = max(-r[j], 0.0)
                return QpSolution(x, "infeasible", tuple(sorted(active)), lam, np.inf, iters, certificate=cert)
            t = min(t1, t2)
            if np.isfinite(t2):
                x = x + t * z
            for j, idx in enumerate(active):
                lam[idx] -= t * r[j]
            lam_q += t
            if t2 <= t1:
                lam[q] = lam_q
                active.append(q)
                break
            dropped = active.pop(k_drop)
            lam[dropped] = 0.0
    lam = np.maximum(lam, 0.0)
    return QpSolution(x, "solved", tuple(sorted(active)), lam, kkt_residual(p, x, lam), iters)


def solve_penalized(p: QpProblem, slack_weight: float, max_iter: int = MAX_ITER) -> QpSolution:
    """Each row gets a slack s_i with cost slack_weight/2 * s_i^2; always feasible."""
    if not slack_weight > 0:
        raise ConfigurationError("slack_weight must be positive")
    k, m = p.n_rows, p.m
    if k == 0:
        sol = solve(p, max_iter)
        sol.slack = np.zeros(0)
        return sol
    root = np.sqrt(slack_weight)
    # substitute s = s' / sqrt(w) so the Hessian stays the identity
    A_aug = np.hstack([p.A, np.eye(k) / root])
    aug = QpProblem(np.concatenate([p.u0, np.zeros(k)]), A_aug, p.b)
    sol = solve(aug, max_iter)
    if not sol.solved:
        raise SolverFailureError("slack-augmented QP reported infeasible")
    u = sol.u_star[:m]
    slack = np.maximum(sol.u_star[m:] / root, 0.0)
    return QpSolution(u, "solved", sol.active_set, sol.multipliers, sol.kkt_residual, sol.iterations, slack=slack)


def solve_with_slack(p: QpProblem, slack_weight: float = 1e3, max_iter: int = MAX_ITER) -> QpSolution:
    """Exact solve when feasible (zero slack), penalized slack QP otherwise."""
    if not slack_weight > 0:
        raise ConfigurationError("slack_weight must be positive")
    sol = solve(p, max_iter)
    if sol.solved:
        sol.slack = np.zeros(p.n_rows)
        return sol
    return solve_penalized(p, slack_weight, max_iter)
