"""Parameterised discrete-time transition functions and the rollout operator.

Every step function is vectorised: states have shape ``(..., n_x)``, controls
``(..., n_u)`` and parameters ``(..., n_theta)``; leading dimensions broadcast.
The controller relies on this to evaluate thousands of rollouts in one call.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError, StepError

GRAVITY = 9.81

PENDULUM_DT = 0.05
PENDULUM_MAX_TORQUE = 2.0
PENDULUM_MAX_SPEED = 8.0

SKIDSTEER_DT = 0.1
SKIDSTEER_MAX_WHEEL_SPEED = 10.0


@dataclass(frozen=True)
class SimParams:
    """Latent physical parameters of a simulator, with human-readable labels."""

    values: NDArray[np.float64]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 1:
            raise InvalidInputError("SimParams values must be a vector")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError(f"non-finite parameter values {values}")
        if self.labels and len(self.labels) != values.size:
            raise InvalidInputError(
                f"{len(self.labels)} labels for {values.size} parameter values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self):
        return self.values.size


def _check_finite(name: str, *arrays: NDArray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidInputError(f"{name}: non-finite input")


def wrap_angle(phi: ArrayLike) -> NDArray[np.float64]:
    """Wrap angles to the half-open interval (-pi, pi]."""
    phi = np.asarray(phi, dtype=np.float64)
    wrapped = np.pi - np.mod(np.pi - phi, 2.0 * np.pi)
    return wrapped


def clip_control(v: ArrayLike, bounds: ArrayLike) -> NDArray[np.float64]:
    """Clamp a (batch of) control vector(s) elementwise to ``bounds``.

    ``bounds`` has shape ``(m, 2)`` holding ``[lo, hi]`` per control dimension,
    or ``(2,)`` for a scalar control.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[..., 0], bounds[..., 1]
    if np.any(lo > hi):
        raise InvalidInputError(f"lower bound above upper bound: {bounds}")
    return np.clip(np.asarray(v, dtype=np.float64), lo, hi)


def pendulum_step(state: ArrayLike, torque: ArrayLike, params: ArrayLike,
                  dt: float = PENDULUM_DT) -> NDArray[np.float64]:
    """Advance the swing-up pendulum by one semi-implicit Euler step.

    The angle is measured from the upright position. Angular acceleration is
    ``3g/(2l) sin(theta) + 3/(m l^2) u``; the velocity is updated first and
    clamped to +-8 rad/s, then the angle moves with the new velocity.

    Args:
        state: ``(..., 2)`` array of ``(theta, theta_dot)``.
        torque: ``(...)`` array of already clipped joint torques.
        params: ``(..., 2)`` array of ``(length, mass)``.
        dt: integration step in seconds.
    """
    state = np.asarray(state, dtype=np.float64)
    torque = np.asarray(torque, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    _check_finite("pendulum_step", state, torque, params)
    length, mass = params[..., 0], params[..., 1]
    if np.any(length <= 0) or np.any(mass <= 0):
        raise InvalidInputError("pendulum length and mass must be positive")

    theta, theta_dot = state[..., 0], state[..., 1]
    accel = 3.0 * GRAVITY / (2.0 * length) * np.sin(theta) + 3.0 / (mass * length**2) * torque
    new_theta_dot = np.clip(theta_dot + accel * dt, -PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED)
    new_theta = theta + new_theta_dot * dt
    return np.stack([new_theta, new_theta_dot], axis=-1)


def skidsteer_step(state: ArrayLike, wheel_speeds: ArrayLike, params: ArrayLike,
                   dt: float = SKIDSTEER_DT) -> NDArray[np.float64]:
    """Advance the modified-unicycle skid-steer model by one Euler step.

    The longitudinal ICR offset ``x_icr`` turns rotation into lateral slip
    ``v_y = x_icr * omega``.

    Args:
        state: ``(..., 3)`` array of ``(x, y, phi)``.
        wheel_speeds: ``(..., 2)`` array of ``(omega_left, omega_right)`` in rad/s.
        params: ``(..., 3)`` array of ``(x_icr, r_w, a_w)``.
        dt: integration step in seconds.
    """
    state = np.asarray(state, dtype=np.float64)
    wheel_speeds = np.asarray(wheel_speeds, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    _check_finite("skidsteer_step", state, wheel_speeds, params)
    x_icr, r_w, a_w = params[..., 0], params[..., 1], params[..., 2]
    if np.any(r_w <= 0) or np.any(a_w <= 0):
        raise InvalidInputError("wheel radius and axial distance must be positive")

    w_l, w_r = wheel_speeds[..., 0], wheel_speeds[..., 1]
    v = r_w * (w_r + w_l) / 2.0
    omega = r_w * (w_r - w_l) / a_w
    v_y = x_icr * omega
    phi = state[..., 2]
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    x = state[..., 0] + dt * (v * cos_phi - v_y * sin_phi)
    y = state[..., 1] + dt * (v * sin_phi + v_y * cos_phi)
    return np.stack([x, y, wrap_angle(phi + dt * omega)], axis=-1)


@dataclass(frozen=True)
class Environment:
    """Common contract shared by every simulated system.

    ``step(states, controls, params)`` receives controls already clipped to
    ``control_bounds`` and is vectorised over leading dimensions.
    """

    name: str
    state_dim: int
    control_dim: int
    param_labels: tuple[str, ...]
    control_bounds: NDArray[np.float64]
    dt: float
    transition: Callable[..., NDArray[np.float64]] = field(repr=False)

    @property
    def param_dim(self) -> int:
        return len(self.param_labels)

    def step(self, states, controls, params) -> NDArray[np.float64]:
        return self.transition(states, controls, params, self.dt)

    def clip(self, controls) -> NDArray[np.float64]:
        return clip_control(controls, self.control_bounds)

    def params(self, values: Sequence[float]) -> SimParams:
        p = SimParams(values, self.param_labels)
        if len(p) != self.param_dim:
            raise InvalidInputError(
                f"{self.name} expects {self.param_dim} parameters, got {len(p)}")
        return p


def _pendulum_transition(states, controls, params, dt):
    return pendulum_step(states, np.asarray(controls)[..., 0], params, dt)


def make_pendulum(dt: float = PENDULUM_DT, max_torque: float = PENDULUM_MAX_TORQUE) -> Environment:
    return Environment(
        name="pendulum",
        state_dim=2,
        control_dim=1,
        param_labels=("pole length [m]", "pole mass [kg]"),
        control_bounds=np.array([[-max_torque, max_torque]]),
        dt=dt,
        transition=_pendulum_transition,
    )


def make_skidsteer(dt: float = SKIDSTEER_DT,
                   max_wheel_speed: float = SKIDSTEER_MAX_WHEEL_SPEED) -> Environment:
    return Environment(
        name="skidsteer",
        state_dim=3,
        control_dim=2,
        param_labels=("ICR offset x_icr [m]", "wheel radius r_w [m]", "axial distance a_w [m]"),
        control_bounds=np.array([[-max_wheel_speed, max_wheel_speed]] * 2),
        dt=dt,
        transition=skidsteer_step,
    )


ENVIRONMENTS: dict[str, Callable[..., Environment]] = {
    "pendulum": make_pendulum,
    "skidsteer": make_skidsteer,
}


def make_env(name: str, **kwargs) -> Environment:
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return factory(**kwargs)


def rollout(env: Environment, x0: ArrayLike, controls: ArrayLike,
            params: SimParams | ArrayLike) -> NDArray[np.float64]:
    """Apply ``controls`` recursively from ``x0`` and return all T+1 states.

    Controls are clipped to the actuator bounds before each step. The result
    is a pure function of its inputs.
    """
    x = np.asarray(x0, dtype=np.float64)
    if x.shape != (env.state_dim,):
        raise InvalidInputError(f"x0 must have shape ({env.state_dim},), got {x.shape}")
    theta = params.values if isinstance(params, SimParams) else np.asarray(params, dtype=np.float64)
    controls = np.asarray(controls, dtype=np.float64).reshape(-1, env.control_dim)

    states = np.empty((controls.shape[0] + 1, env.state_dim))
    states[0] = x
    for t, u in enumerate(controls):
        if not np.all(np.isfinite(u)):
            raise StepError("non-finite control", t)
        try:
            states[t + 1] = env.step(states[t], env.clip(u), theta)
        except InvalidInputError as exc:
            raise StepError(str(exc), t) from exc
    return states
