"""Fixed-time identification of the Koopman generator and the residual disturbance.

The estimate ``lam_hat`` (column-stacked generator) is driven by the innovation

    nu = (d psi/dx) xdot - Psi(x) lam_hat

through the fixed-time law

    d lam_hat/dt = Gamma Psi^T nu (a |nu|^(2/w) + b |nu|^(-2/w)),

and the disturbance is read back through the Jacobian pseudoinverse. The
settling time and the time-explicit error bound delta(t) follow from the gains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, IllConditionedDataError, NumericalBlowupError
from .observables import LiftedFrame, psi_block_apply, psi_block_transpose_apply

NU_FLOOR = 1e-9
ISOTROPY_RTOL = 1e-12
MAX_SUBSTEPS = 100_000


@dataclass(frozen=True)
class AdaptationGains:
    gamma_diag: np.ndarray
    a: float = 1.0
    b: float = 1.0
    w: float = 4.0
    s: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.gamma_diag, dtype=float).reshape(-1)
        object.__setattr__(self, "gamma_diag", g)
        if g.size == 0 or not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ConfigurationError("Gamma diagonal entries must be finite and positive")
        if not (self.a > 0 and self.b > 0):
            raise ConfigurationError(f"a and b must be positive (a={self.a}, b={self.b})")
        if not self.w > 2:
            raise ConfigurationError(f"w must exceed 2 (w={self.w})")
        if not self.s > 0:
            raise ConfigurationError(f"s must be positive (s={self.s})")

    @property
    def lambda_max(self) -> float:
        return float(self.gamma_diag.max())

    @classmethod
    def for_settling_time(cls, T: float, N: int, a: float = 1.0, b: float = 1.0, w: float = 4.0, s: float = 1.0):
        """Gamma = gamma I with gamma chosen so that ``settling_time`` returns ``T``."""
        if not T > 0:
            raise ConfigurationError("target settling time must be positive")
        gamma = w * math.pi / (4.0 * s * T * math.sqrt(a * b))
        return cls(np.full(N * N, gamma), a=a, b=b, w=w, s=s)


def settling_time(gains: AdaptationGains) -> float:
    """T = w pi / (4 s lambda_max(Gamma) sqrt(a b))."""
    return gains.w * math.pi / (4.0 * gains.s * gains.lambda_max * math.sqrt(gains.a * gains.b))


@dataclass(frozen=True)
class GeneratorEstimate:
    lambda_hat: np.ndarray
    gains: AdaptationGains
    T: float
    t: float = 0.0

    @classmethod
    def zero(cls, gains: AdaptationGains) -> "GeneratorEstimate":
        return cls(np.zeros(gains.gamma_diag.size), gains, settling_time(gains), 0.0)

    @classmethod
    def start(cls, gains: AdaptationGains, lambda0) -> "GeneratorEstimate":
        lam = np.array(lambda0, dtype=float).reshape(-1)
        if lam.size != gains.gamma_diag.size:
            raise DimensionError("initial estimate length does not match Gamma")
        return cls(lam, gains, settling_time(gains), 0.0)


def innovation(frame: LiftedFrame, x_dot, lambda_hat) -> np.ndarray:
    """nu = (d psi/dx) xdot - Psi(x) lambda_hat."""
    x_dot = np.asarray(x_dot, dtype=float).reshape(-1)
    if x_dot.size != frame.jac.shape[1]:
        raise DimensionError(f"x_dot must have dimension {frame.jac.shape[1]}, got {x_dot.size}")
    return frame.jac @ x_dot - psi_block_apply(frame.psi, lambda_hat)


def adaptation_rate(frame: LiftedFrame, nu, gains: AdaptationGains, nu_floor: float = NU_FLOOR) -> np.ndarray:
    """Right-hand side of the adaptation law, in the overflow-safe direction form."""
    nu = np.asarray(nu, dtype=float)
    r = float(np.linalg.norm(nu))
    if r <= nu_floor:
        return np.zeros_like(gains.gamma_diag)
    e = 2.0 / gains.w
    # overflow shows up as a non-finite estimate and is reported by adapt_step
    with np.errstate(over="ignore", invalid="ignore"):
        rr = np.float64(r)
        scale = gains.a * rr ** (1.0 + e) + gains.b * rr ** (1.0 - e)
        return gains.gamma_diag * psi_block_transpose_apply(frame.psi, nu / r) * scale


def adapt_step(
    est: GeneratorEstimate,
    frame: LiftedFrame,
    x_dot,
    dt: float,
    method: str = "euler",
    nu_floor: float = NU_FLOOR,
) -> GeneratorEstimate:
    """Advance the estimate by ``dt`` with the lifted frame and derivative held fixed.

    ``method="euler"`` takes one explicit Euler step of the law. ``method="flow"``
    integrates the law exactly over the step: with x and xdot frozen the
    innovation obeys ``dnu/dt = -G nu phi(|nu|)`` with ``G = diag(psi^T Gamma_k psi)``,
    and when G is a multiple of the identity its magnitude has the closed form
    ``atan(sqrt(a/b) |nu|^(2/w))`` decreasing linearly at ``(2 g / w) sqrt(ab)``.
    Otherwise the flow is resolved by Euler substeps with contraction <= 1/2.
    """
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    gains = est.gains
    nu = innovation(frame, x_dot, est.lambda_hat)
    r = float(np.linalg.norm(nu))
    if method == "euler":
        delta = adaptation_rate(frame, nu, gains, nu_floor) * dt
    elif method == "flow":
        delta = _flow_increment(frame, nu, r, gains, dt, nu_floor)
    else:
        raise ConfigurationError(f"unknown adaptation method {method!r}")
    lam = est.lambda_hat + delta
    if not np.all(np.isfinite(lam)):
        raise NumericalBlowupError(r, dt)
    return replace(est, lambda_hat=lam, t=est.t + dt)


def _block_gains(frame: LiftedFrame, gains: AdaptationGains) -> np.ndarray:
    N = frame.psi.size
    return gains.gamma_diag.reshape(N, N) @ (frame.psi**2)


def _flow_increment(frame, nu, r, gains, dt, nu_floor) -> np.ndarray:
    if r <= nu_floor:
        return np.zeros_like(gains.gamma_diag)
    g = _block_gains(frame, gains)
    gmax = float(g.max())
    direction = gains.gamma_diag * psi_block_transpose_apply(frame.psi, nu / r)
    if float(g.min()) >= gmax * (1.0 - ISOTROPY_RTOL):
        e = 2.0 / gains.w
        ratio = math.sqrt(gains.a / gains.b)
        theta0 = math.atan(ratio * r**e)
        theta1 = theta0 - (2.0 * gmax / gains.w) * math.sqrt(gains.a * gains.b) * dt
        r1 = 0.0 if theta1 <= 0.0 else (math.tan(theta1) / ratio) ** (1.0 / e)
        return direction * ((r - r1) / gmax)
    # Anisotropic blocks: the innovation direction rotates, so substep.
    total = np.zeros_like(gains.gamma_diag)
    nu = nu.copy()
    remaining = dt
    for _ in range(MAX_SUBSTEPS):
        r = float(np.linalg.norm(nu))
        if r <= nu_floor or remaining <= 0.0:
            break
        phi = gains.a * r ** (2.0 / gains.w) + gains.b * r ** (-2.0 / gains.w)
        h = min(remaining, 0.5 / (gmax * phi))
        total += gains.gamma_diag * psi_block_transpose_apply(frame.psi, nu) * phi * h
        nu = nu - g * nu * phi * h
        remaining -= h
    return total


def reconstruct_disturbance(frame: LiftedFrame, lambda_hat, f_x, g_x, u) -> np.ndarray:
    """d_hat = (d psi/dx)^+ Psi(x) lambda_hat - (f(x) + g(x) u)."""
    a_xu = np.asarray(f_x, dtype=float) + np.asarray(g_x, dtype=float) @ np.asarray(u, dtype=float)
    return frame.jac_pinv @ psi_block_apply(frame.psi, lambda_hat) - a_xu


@dataclass(frozen=True)
class ErrorBoundParams:
    """Constants of the time-explicit bound, fixed at t = 0.

    ``decay_rate`` is the slope of A(t); it is pi / (2T) so that A reaches zero
    no later than the settling time for any Xi < pi/2.
    """

    D: float
    Lambda: float
    Xi: float
    sigma_min_W0: float
    decay_rate: float
    T: float

    @classmethod
    def initialize(cls, gains: AdaptationGains, frame0: LiftedFrame, D: float) -> "ErrorBoundParams":
        if not D >= 0:
            raise ConfigurationError("D must be nonnegative")
        a, b, w = gains.a, gains.b, gains.w
        T = settling_time(gains)
        Lambda = math.sqrt(2.0 * gains.lambda_max) * (a / b) ** (w / 4.0)
        smin_W0 = frame0.sigma_min_W
        l_entry = 2.0 * D / smin_W0
        # 1/2 l^T Gamma^-1 l with l = l_entry * ones
        quad = 0.5 * l_entry**2 * float(np.sum(1.0 / gains.gamma_diag))
        Xi = math.atan(math.sqrt(b / a) * quad ** (1.0 / w))
        return cls(D, Lambda, Xi, smin_W0, math.pi / (2.0 * T), T)


def tan_factor(params: ErrorBoundParams, gains: AdaptationGains, t: float) -> tuple[float, float]:
    """Return (tan^(w/2)(A(t)), A(t))."""
    if t < 0:
        raise ConfigurationError(f"time must be nonnegative, got {t}")
    A = max(params.Xi - params.decay_rate * t, 0.0)
    if A == 0.0:
        return 0.0, 0.0
    return math.tan(A) ** (gains.w / 2.0), A


def error_bound(params: ErrorBoundParams, gains: AdaptationGains, frame: LiftedFrame, t: float) -> tuple[float, float]:
    """delta(t) = Lambda sigma_max(W(t)) tan^(w/2)(A(t)); returns (delta, A)."""
    tf, A = tan_factor(params, gains, t)
    if A == 0.0:
        return 0.0, 0.0
    return params.Lambda * frame.sigma_max_W * tf, A


@dataclass(frozen=True)
class BoundRate:
    value: float
    analytic_only: bool


def error_bound_derivative(
    params: ErrorBoundParams,
    gains: AdaptationGains,
    frame: LiftedFrame,
    t: float,
    sigma_history: Sequence[float] = (),
    fd_step: float = 1e-3,
) -> BoundRate:
    """Time derivative of delta(t).

    The sigma_max(W) rate is a finite difference over the last two entries of
    ``sigma_history`` (spaced ``fd_step`` apart). With fewer than two entries only
    the analytic tan term is returned and the result is flagged.
    """
    if not fd_step > 0:
        raise ConfigurationError("fd_step must be positive")
    tf, A = tan_factor(params, gains, t)
    if A == 0.0:
        return BoundRate(0.0, len(sigma_history) < 2)
    w = gains.w
    sigma = frame.sigma_max_W
    sec2 = 1.0 / math.cos(A) ** 2
    tan_term = -(w / 2.0) * params.decay_rate * params.Lambda * sigma * math.tan(A) ** (w / 2.0 - 1.0) * sec2
    if len(sigma_history) < 2:
        return BoundRate(tan_term, True)
    sigma_dot = (sigma_history[-1] - sigma_history[-2]) / fd_step
    return BoundRate(params.Lambda * sigma_dot * tf + tan_term, False)


def batch_generator_fit(samples, rel_tol: float = 1e-12) -> np.ndarray:
    """Least-squares generator from ``(frame, x_dot)`` samples.

    Minimizes sum_k |Psi(x_k) lam - J_k xdot_k|^2, which splits into N problems
    sharing the Gram matrix sum_k psi_k psi_k^T.
    """
    samples = list(samples)
    if not samples:
        raise IllConditionedDataError(0.0)
    N = samples[0][0].psi.size
    if len(samples) < N:
        raise IllConditionedDataError(0.0)
    P = np.array([fr.psi for fr, _ in samples])
    Y = np.array([fr.jac @ np.asarray(xd, dtype=float) for fr, xd in samples])
    return _solve_gram(P.T @ P, P.T @ Y, rel_tol)


def _solve_gram(G, R, rel_tol) -> np.ndarray:
    eig = np.linalg.eigvalsh(G)
    if eig[0] <= rel_tol * max(eig[-1], 1.0):
        raise IllConditionedDataError(float(eig[0]))
    L = np.linalg.solve(G, R)
    # column k of L solves block k; vec stacks columns.
    return L.T.ravel()


class BatchIdentifier:
    """Accumulating least-squares baseline that refits on a fixed period."""

    def __init__(self, N: int, refit_period: float = 0.5):
        self.N = N
        self.refit_period = refit_period
        self.G = np.zeros((N, N))
        self.R = np.zeros((N, N))
        self.count = 0
        self.lambda_hat = np.zeros(N * N)
        self.fitted = False
        self._last_fit = 0.0

    def add(self, frame: LiftedFrame, x_dot) -> None:
        y = frame.jac @ np.asarray(x_dot, dtype=float)
        self.G += np.outer(frame.psi, frame.psi)
        self.R += np.outer(frame.psi, y)
        self.count += 1

    def maybe_refit(self, t: float) -> bool:
        if t - self._last_fit < self.refit_period - 1e-12 or self.count < self.N:
            return False
        self._last_fit = t
        try:
            self.lambda_hat = _solve_gram(self.G, self.R, 1e-12)
        except IllConditionedDataError:
            return False
        self.fitted = True
        return True
