"""Closed-loop simulation: measure -> adapt -> estimate/bound -> control -> integrate."""
from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..control import DisturbanceEstimate, control_step, normalize_regime
from ..errors import KoopFxtError
from ..fxt_id import (
    BatchIdentifier,
    ErrorBoundParams,
    GeneratorEstimate,
    adapt_step,
    error_bound,
    error_bound_derivative,
    reconstruct_disturbance,
    settling_time,
)
from ..observables import lift
from ..plant import NoiseStream, drift, input_matrix, integrate_step, wind_disturbance
from .config import ScenarioConfig

log = logging.getLogger(__name__)

BOUND_SLACK = 1e-6
SETTLE_TOL_FRACTION = 0.01


class SimulationError(KoopFxtError):
    def __init__(self, step: int, t: float, z, cause: Exception):
        self.step = step
        self.t = t
        self.z = np.asarray(z).tolist()
        self.cause = cause
        super().__init__(f"step {step} (t={t:.4f}) z={self.z}: {cause}")


@dataclass
class RunLog:
    regime: str
    seed: int
    noise: bool
    dt: float
    T: float
    D: float
    t: np.ndarray
    z: np.ndarray
    z_meas: np.ndarray
    u: np.ndarray
    d_true: np.ndarray
    d_hat: np.ndarray
    delta: np.ndarray
    h: np.ndarray
    qp_active: np.ndarray
    qp_iters: np.ndarray
    slack: np.ndarray
    d_err_inf: np.ndarray
    obstacles: list = field(default_factory=list)
    reference: tuple = (4.0, 0.2 * math.pi)
    runtime_ms: float = 0.0

    @property
    def steps(self) -> int:
        return self.t.size

    def summary(self) -> dict:
        after = self.t >= self.T
        identified = self.regime in ("robust", "robust_adaptive", "naive")
        max_err_after = float(self.d_err_inf[after].max()) if identified and after.any() else None
        viol = self.d_err_inf - (self.delta + BOUND_SLACK)
        bound_ok = bool(np.all(viol <= 0)) if self.regime in ("robust", "robust_adaptive") else None
        min_h = self.h.min(axis=0)
        return {
            "regime": self.regime,
            "seed": self.seed,
            "noise": self.noise,
            "steps": int(self.steps),
            "dt": self.dt,
            "settling_time": self.T,
            "min_h": float(min_h.min()),
            "min_h_per_obstacle": [float(v) for v in min_h],
            "safe": bool(min_h.min() >= 0.0),
            "max_d_err_after_T": max_err_after,
            "settled": None if max_err_after is None else bool(max_err_after <= SETTLE_TOL_FRACTION * self.D),
            "bound_valid": bound_ok,
            "max_bound_excess": float(viol.max()) if bound_ok is not None else None,
            "delta_zero_after_T": bool(np.all(self.delta[self.t > self.T] == 0.0)),
            "qp_slack_steps": int(np.count_nonzero(self.slack > 0)),
            "max_abs_u": float(np.abs(self.u).max()),
            "wall_clock_ms": self.runtime_ms,
        }


def run_scenario(cfg: ScenarioConfig, regime: str, seed: int = 0, noise: bool = False) -> RunLog:
    regime = normalize_regime(regime)
    started = time.perf_counter()
    basis = cfg.build_basis()
    gains = cfg.build_gains(basis.N)
    wind = cfg.build_wind()
    noise_model = cfg.build_noise(seed, noise)
    obstacles = cfg.build_obstacles()
    ctrl = cfg.build_controller(regime)
    ref = cfg.build_reference()
    ad = cfg.adaptation
    dt = cfg.integration.dt
    steps = int(round(cfg.integration.horizon / dt))
    n_obs = len(obstacles)

    est = GeneratorEstimate.zero(gains)
    batch = BatchIdentifier(basis.N, ad.baseline_refit_period)
    params = None
    sigma_hist: deque = deque(maxlen=2)
    g = input_matrix()

    t_log = np.arange(steps) * dt
    z_log = np.zeros((steps, 4))
    zm_log = np.zeros((steps, 4))
    u_log = np.zeros((steps, 2))
    dtrue_log = np.zeros((steps, 2))
    dhat_log = np.zeros((steps, 2))
    delta_log = np.zeros(steps)
    h_log = np.zeros((steps, n_obs))
    act_log = np.zeros(steps, dtype=int)
    it_log = np.zeros(steps, dtype=int)
    slack_log = np.zeros(steps)
    err_log = np.zeros(steps)

    noise_stream = NoiseStream(noise_model, steps)
    z = np.array(cfg.plant.z0, dtype=float)
    u_prev = np.zeros(2)
    for k in range(steps):
        t = k * dt
        try:
            d_true = wind_disturbance(wind, z)
            z_dot = drift(z) + g @ u_prev + d_true
            z_m, zd_m = noise_stream.measure(z, z_dot, k)
            d_hat = np.zeros(4)
            delta = delta_dot = 0.0
            if regime in ("robust", "robust_adaptive"):
                frame = lift(basis, z_m)
                if params is None:
                    params = ErrorBoundParams.initialize(gains, frame, ad.D)
                est = adapt_step(est, frame, zd_m, dt, ad.method, ad.nu_floor)
                d_hat = reconstruct_disturbance(frame, est.lambda_hat, drift(z_m), g, u_prev)
                delta, _ = error_bound(params, gains, frame, t)
                sigma_hist.append(frame.sigma_max_W)
                delta_dot = error_bound_derivative(params, gains, frame, t, sigma_hist, dt).value
            elif regime == "naive":
                frame = lift(basis, z_m)
                batch.add(frame, zd_m)
                batch.maybe_refit(t)
                if batch.fitted:
                    d_hat = reconstruct_disturbance(frame, batch.lambda_hat, drift(z_m), g, u_prev)
            d_est = DisturbanceEstimate(d_hat, delta, delta_dot)
            u, diag = control_step(ctrl, ref, z_m, t, d_est, obstacles)
        except KoopFxtError as exc:
            raise SimulationError(k, t, z, exc) from exc

        z_log[k] = z
        zm_log[k] = z_m
        u_log[k] = u
        dtrue_log[k] = d_true[2:]
        dhat_log[k] = d_hat[2:]
        delta_log[k] = delta
        h_log[k] = [ob.h(z) for ob in obstacles]
        act_log[k] = sum(1 << i for i in diag.active_set)
        it_log[k] = diag.iterations
        slack_log[k] = diag.slack
        err_log[k] = np.abs(d_true - d_hat).max() if regime != "nominal" else np.abs(d_true).max()

        try:
            z = integrate_step(z, u, wind, dt, cfg.integration.method)
        except KoopFxtError as exc:
            raise SimulationError(k, t, z, exc) from exc
        u_prev = u

    T = settling_time(gains)
    return RunLog(
        regime=regime,
        seed=seed,
        noise=noise,
        dt=dt,
        T=T,
        D=wind.D,
        t=t_log,
        z=z_log,
        z_meas=zm_log,
        u=u_log,
        d_true=dtrue_log,
        d_hat=dhat_log,
        delta=delta_log,
        h=h_log,
        qp_active=act_log,
        qp_iters=it_log,
        slack=slack_log,
        d_err_inf=err_log,
        obstacles=[(ob.center, ob.radius) for ob in obstacles],
        reference=(ref.amplitude, ref.omega),
        runtime_ms=(time.perf_counter() - started) * 1e3,
    )
