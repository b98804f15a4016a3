"""Planar double integrator in a spatially varying wind, with measurement noise.

State ``z = (x, y, vx, vy)``, input ``u = (ax, ay)``:

    zdot = (vx, vy, ax + dx(z), ay + dy(z)),    d_i = clip(C_d (w_i(z) - v_i), -D, D)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError

N_STATE = 4
N_INPUT = 2

_G = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class WindField:
    amp_x: float = 5.0
    amp_y: float = 5.0
    k: tuple[float, float, float, float] = (0.5, 0.3, 0.4, 0.6)
    mean_x: float = 2.0
    mean_y: float = -1.0
    drag: float = 1.0
    D: float = 10.0
    enabled: bool = True

    def __post_init__(self):
        if self.D < 0 or self.drag < 0:
            raise ConfigurationError("wind cap D and drag coefficient must be nonnegative")
        if len(self.k) != 4:
            raise ConfigurationError("wind needs four wavenumbers")

    def velocity(self, z) -> tuple[float, float]:
        x, y = z[0], z[1]
        k1, k2, k3, k4 = self.k
        wx = self.amp_x * np.sin(k1 * y) * np.cos(k2 * x) + self.mean_x
        wy = self.amp_y * np.cos(k3 * x) * np.sin(k4 * y) + self.mean_y
        return wx, wy


@dataclass(frozen=True)
class NoiseModel:
    sigma_x: float = 0.0
    sigma_xdot: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_xdot < 0:
            raise ConfigurationError("noise standard deviations must be nonnegative")

    @property
    def active(self) -> bool:
        return self.sigma_x > 0 or self.sigma_xdot > 0


@dataclass(frozen=True)
class ControlAffinePlant:
    """Known part of the dynamics, ``f(z) + g(z) u``."""

    f: object
    g: object


def drift(z) -> np.ndarray:
    """Known drift f(z)."""
    return np.array([z[2], z[3], 0.0, 0.0])


def input_matrix(z=None) -> np.ndarray:
    """Known input matrix g(z)."""
    return _G.copy()


DOUBLE_INTEGRATOR = ControlAffinePlant(drift, input_matrix)


def _wind_accel(wind: WindField, x: float, y: float, vx: float, vy: float) -> tuple[float, float]:
    k1, k2, k3, k4 = wind.k
    wx = wind.amp_x * math.sin(k1 * y) * math.cos(k2 * x) + wind.mean_x
    wy = wind.amp_y * math.cos(k3 * x) * math.sin(k4 * y) + wind.mean_y
    cap = wind.D
    dx = min(max(wind.drag * (wx - vx), -cap), cap)
    dy = min(max(wind.drag * (wy - vy), -cap), cap)
    return dx, dy


def wind_disturbance(wind: WindField, z) -> np.ndarray:
    if not wind.enabled:
        return np.zeros(N_STATE)
    dx, dy = _wind_accel(wind, float(z[0]), float(z[1]), float(z[2]), float(z[3]))
    return np.array([0.0, 0.0, dx, dy])


def plant_derivative(z, u, wind: WindField) -> np.ndarray:
    return np.array(_deriv(wind, *map(float, z), float(u[0]), float(u[1])))


def _deriv(wind, x, y, vx, vy, ax, ay):
    if wind.enabled:
        dx, dy = _wind_accel(wind, x, y, vx, vy)
    else:
        dx = dy = 0.0
    return vx, vy, ax + dx, ay + dy


def integrate_step(z, u, wind: WindField, dt: float, method: str = "rk4") -> np.ndarray:
    """One fixed step with u held constant over the step."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    x, y, vx, vy = map(float, z)
    ax, ay = float(u[0]), float(u[1])
    if not all(math.isfinite(v) for v in (x, y, vx, vy, ax, ay)):
        raise DivergenceError(f"non-finite state or input before step: z={[x, y, vx, vy]}, u={[ax, ay]}")
    if method not in ("euler", "rk4"):
        raise ConfigurationError(f"unknown integration method {method!r}")
    try:
        out = _step(wind, x, y, vx, vy, ax, ay, dt, method)
    except (ValueError, OverflowError) as exc:
        raise DivergenceError(f"state overflow during step from z={[x, y, vx, vy]}, u={[ax, ay]}, dt={dt}") from exc
    if not all(math.isfinite(v) for v in out):
        raise DivergenceError(f"non-finite state after step: z={[x, y, vx, vy]}, u={[ax, ay]}, dt={dt}")
    return np.array(out)


def _step(wind, x, y, vx, vy, ax, ay, dt, method):
    if method == "euler":
        d = _deriv(wind, x, y, vx, vy, ax, ay)
        out = [x + dt * d[0], y + dt * d[1], vx + dt * d[2], vy + dt * d[3]]
    elif method == "rk4":
        h = 0.5 * dt
        k1 = _deriv(wind, x, y, vx, vy, ax, ay)
        k2 = _deriv(wind, x + h * k1[0], y + h * k1[1], vx + h * k1[2], vy + h * k1[3], ax, ay)
        k3 = _deriv(wind, x + h * k2[0], y + h * k2[1], vx + h * k2[2], vy + h * k2[3], ax, ay)
        k4 = _deriv(wind, x + dt * k3[0], y + dt * k3[1], vx + dt * k3[2], vy + dt * k3[3], ax, ay)
        c = dt / 6.0
        zz = (x, y, vx, vy)
        out = [zz[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(4)]
    return out


_STATE_CHANNEL = 0
_DERIV_CHANNEL = 1
_WORDS_PER_BLOCK = 4


def _normals_from_raw(raw: np.ndarray) -> np.ndarray:
    # Box-Muller on pairs of 53-bit uniforms in (0, 1); a fixed number of words
    # per step keeps every step's draw tied to its own counter block.
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    u1, u2 = u[..., 0::2], u[..., 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(u.shape)
    out[..., 0::2] = r * np.cos(2.0 * math.pi * u2)
    out[..., 1::2] = r * np.sin(2.0 * math.pi * u2)
    return out


def noise_block(seed: int, channel: int, first_step: int, n_steps: int, size: int = N_STATE) -> np.ndarray:
    """Standard normals for steps ``first_step .. first_step + n_steps - 1``, shape (n_steps, size).

    Row ``i`` equals what a single draw at step ``first_step + i`` returns, so a
    run can pregenerate all of its noise without changing the sample path.
    """
    if size > _WORDS_PER_BLOCK:
        raise ValueError(f"at most {_WORDS_PER_BLOCK} normals per step and channel")
    if n_steps <= 0:
        return np.zeros((0, size))
    # Philox is counter-based: (seed, channel) is the key, the step index the counter.
    bitgen = np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, channel], counter=[first_step, 0, 0, 0])
    raw = bitgen.random_raw(_WORDS_PER_BLOCK * n_steps).reshape(n_steps, _WORDS_PER_BLOCK)
    return _normals_from_raw(raw)[:, :size]


def _normals(seed: int, step: int, channel: int, size: int) -> np.ndarray:
    return noise_block(seed, channel, step, 1, size)[0]


def measure(z, z_dot, noise: NoiseModel, step: int = 0) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    z_dot = np.asarray(z_dot, dtype=float)
    z_meas = z.copy()
    zd_meas = z_dot.copy()
    if noise.sigma_x > 0:
        z_meas = z_meas + noise.sigma_x * _normals(noise.seed, step, _STATE_CHANNEL, z.size)
    if noise.sigma_xdot > 0:
        zd_meas = zd_meas + noise.sigma_xdot * _normals(noise.seed, step, _DERIV_CHANNEL, z_dot.size)
    return z_meas, zd_meas


class NoiseStream:
    """Pregenerated measurement noise for steps ``0 .. n_steps - 1``."""

    def __init__(self, noise: NoiseModel, n_steps: int):
        self.noise = noise
        self.state = noise.sigma_x * noise_block(noise.seed, _STATE_CHANNEL, 0, n_steps) if noise.sigma_x > 0 else None
        self.deriv = noise.sigma_xdot * noise_block(noise.seed, _DERIV_CHANNEL, 0, n_steps) if noise.sigma_xdot > 0 else None

    def measure(self, z, z_dot, step: int) -> tuple[np.ndarray, np.ndarray]:
        z_meas = z if self.state is None else z + self.state[step]
        zd_meas = z_dot if self.deriv is None else z_dot + self.deriv[step]
        return z_meas, zd_meas
