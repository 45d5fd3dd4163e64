"""Information-theoretic sampling MPC with uncertain simulator parameters.

Each control step samples ``K`` perturbation sequences, rolls every sequence
out under ``L`` parameter instances (sigma points, Monte Carlo draws, or a
single point estimate), averages the per-parameter costs, and moves the
nominal plan towards the softmin-weighted perturbations.
"""

from __future__ import annotations

import enum
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dynamics import Environment
from .errors import ConfigError, InvalidInputError
from .unscented import SigmaSet, UtConfig, sigma_points


class Propagation(str, enum.Enum):
    UT = "ut"
    MONTE_CARLO = "mc"
    POINT = "point"


@dataclass(frozen=True)
class CostModel:
    """State cost of a rollout.

    ``instant(x_next, x_prev)`` is evaluated after every transition (the
    previous state lets costs use finite-difference speeds); ``terminal(x)``
    once on the final state. Both are vectorised over leading dimensions.
    """

    instant: Callable[[NDArray, NDArray], NDArray]
    terminal: Callable[[NDArray], NDArray] | None = None


@dataclass
class ControllerConfig:
    num_samples: int = 500                 # K
    horizon: int = 30                      # T
    lambda_: float = 10.0
    sigma: ArrayLike = 1.0                 # control noise covariance, scalar or (m, m)
    beta: ArrayLike = 0.0                  # affine control-cost offset
    minimum_control: ArrayLike = 0.0       # rest position the control cost is centred on
    propagation: Propagation = Propagation.POINT
    num_param_samples: int = 1             # L for Monte Carlo
    ut: UtConfig = field(default_factory=UtConfig)
    rest_control: ArrayLike | None = None

    def __post_init__(self):
        self.propagation = Propagation(self.propagation)
        if self.num_samples < 1:
            raise ConfigError("num_samples (K) must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon (T) must be >= 1")
        if not self.lambda_ > 0:
            raise ConfigError("lambda must be positive")
        if self.num_param_samples < 1:
            raise ConfigError("num_param_samples (L) must be >= 1")

    def sigma_matrix(self, m: int) -> NDArray[np.float64]:
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.ndim == 0:
            sigma = sigma * np.eye(m)
        elif sigma.ndim == 1:
            sigma = np.diag(sigma)
        if sigma.shape != (m, m):
            raise ConfigError(f"sigma must be ({m}, {m}), got {sigma.shape}")
        return check_positive_definite(sigma)


def check_positive_definite(sigma: ArrayLike) -> NDArray[np.float64]:
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if not np.allclose(sigma, sigma.T):
        raise ConfigError("control noise covariance must be symmetric")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ConfigError("control noise covariance must be positive definite") from None
    return sigma


def sample_perturbations(rng: np.random.Generator, K: int, T: int, sigma: ArrayLike) -> NDArray[np.float64]:
    """Draw a ``(K, T, m)`` tensor of i.i.d. ``N(0, sigma)`` perturbations."""
    sigma = check_positive_definite(sigma)
    chol = np.linalg.cholesky(sigma)
    z = rng.standard_normal((K, T, sigma.shape[0]))
    return z @ chol.T


def coupling_costs(nominal: NDArray, eps: NDArray, sigma_inv: NDArray, lambda_: float) -> NDArray:
    """``lambda * sum_t u_t^T Sigma^-1 eps_t`` for every sample, shape ``(K,)``."""
    return lambda_ * np.einsum("ti,ij,ktj->k", nominal, sigma_inv, eps)


def rollout_costs(env: Environment, x0: ArrayLike, nominal: NDArray, eps: NDArray,
                  params: NDArray, cost: CostModel) -> NDArray[np.float64]:
    """State cost of every (sequence, parameter) pair, shape ``(K, L)``.

    ``params`` is ``(L, n_theta)`` to share parameter instances across all
    sequences, or ``(K, L, n_theta)`` for per-sequence draws. Every sequence is
    replicated, unchanged, across its ``L`` parameter instances.
    """
    K, T, _ = eps.shape
    params = np.asarray(params, dtype=np.float64)
    L = params.shape[-2]
    x = np.broadcast_to(np.asarray(x0, dtype=np.float64), (K, L, env.state_dim))
    v = env.clip(nominal[None, :, :] + eps)                  # (K, T, m)
    total = np.zeros((K, L))
    for t in range(T):
        x_next = env.step(x, v[:, None, t, :], params)
        total += cost.instant(x_next, x)
        x = x_next
    if cost.terminal is not None:
        total += cost.terminal(x)
    return total


def trajectory_cost(env: Environment, x0: ArrayLike, nominal: ArrayLike, eps: ArrayLike,
                    params: ArrayLike, cost: CostModel, lambda_: float, sigma: ArrayLike) -> float:
    """Cost ``S`` of one perturbation sequence under one parameter vector.

    Accumulates instant state costs along the rollout driven by the clipped
    controls ``u + eps``, the control coupling ``lambda u_t^T Sigma^-1 eps_t``
    using the raw perturbation, and the terminal cost.
    """
    nominal = np.asarray(nominal, dtype=np.float64).reshape(-1, env.control_dim)
    eps = np.asarray(eps, dtype=np.float64).reshape(1, -1, env.control_dim)
    if eps.shape[1] != nominal.shape[0]:
        raise InvalidInputError("perturbation and nominal plan differ in horizon")
    params = np.asarray(params, dtype=np.float64).reshape(1, -1)
    sigma_inv = np.linalg.inv(check_positive_definite(sigma))
    state_cost = rollout_costs(env, x0, nominal, eps, params, cost)[0, 0]
    return float(state_cost + coupling_costs(nominal, eps, sigma_inv, lambda_)[0])


def aggregate_parameter_costs(per_param_costs: ArrayLike, weights: ArrayLike) -> NDArray[np.float64]:
    """Collapse the parameter axis of ``(K, L)`` costs with weights summing to one.

    Computed as ``S_0 + sum_i w_i (S_i - S_0)``, which equals the plain
    weighted sum and returns ``S_0`` exactly when all instances agree.
    """
    costs = np.asarray(per_param_costs, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if costs.ndim == 1:
        costs = costs[None, :]
    if costs.shape[-1] != w.size:
        raise InvalidInputError(f"{costs.shape[-1]} costs per sample for {w.size} weights")
    if abs(w.sum() - 1.0) > 1e-9:
        raise InvalidInputError(f"parameter weights sum to {w.sum()}, expected 1")
    anchor = costs[:, :1]
    return anchor[:, 0] + (costs - anchor) @ w


def importance_weights(costs: ArrayLike, lambda_: float) -> NDArray[np.float64]:
    """Softmin weights ``exp(-(S - min S)/lambda)``, normalised to sum to one."""
    costs = np.asarray(costs, dtype=np.float64)
    if not np.all(np.isfinite(costs)):
        raise InvalidInputError("trajectory costs must be finite")
    if not lambda_ > 0:
        raise InvalidInputError("lambda must be positive")
    unnormalised = np.exp(-(costs - costs.min()) / lambda_)
    return unnormalised / unnormalised.sum()


def update_nominal(nominal: ArrayLike, weights: ArrayLike, eps: ArrayLike) -> NDArray[np.float64]:
    """``u_t + sum_k w_k eps^k_t`` for every time step."""
    return np.asarray(nominal, dtype=np.float64) + np.tensordot(weights, eps, axes=(0, 0))


def roll_plan(nominal: ArrayLike, rest: ArrayLike | None = None) -> NDArray[np.float64]:
    """Shift the plan one step forward and append the rest control."""
    nominal = np.asarray(nominal, dtype=np.float64)
    out = np.empty_like(nominal)
    out[:-1] = nominal[1:]
    out[-1] = 0.0 if rest is None else rest
    return out


def effective_sample_size(weights: NDArray) -> float:
    return float(1.0 / np.sum(weights**2))


@dataclass(frozen=True)
class StepDiagnostics:
    rho: float
    eta: float
    ess: float
    action: NDArray[np.float64]


class DiscoController:
    """Receding-horizon controller with parameter-uncertainty propagation.

    The parameter source depends on ``config.propagation``:

    * ``point``: a parameter vector;
    * ``ut``: an object exposing ``moments() -> (mean, cov)``, or a
      ``(mean, cov)`` tuple;
    * ``mc``: an object exposing ``sample(rng, size) -> (size, n_theta)``.

    Parameters:
        env: model used for internal rollouts.
        cost: state cost of rollouts.
        config: controller hyperparameters.
        params: parameter source, see above.
    """

    def __init__(self, env: Environment, cost: CostModel, config: ControllerConfig, params):
        self.env = env
        self.cost = cost
        self.config = config
        m = env.control_dim
        self.sigma = config.sigma_matrix(m)
        self.sigma_inv = np.linalg.inv(self.sigma)
        self.rest = np.zeros(m) if config.rest_control is None else np.broadcast_to(
            np.asarray(config.rest_control, dtype=np.float64), (m,)).copy()
        beta = np.broadcast_to(np.asarray(config.beta, dtype=np.float64), (m,))
        # plan is stored relative to the minimum control; beta shifts it
        self.minimum_control = (np.broadcast_to(np.asarray(config.minimum_control, dtype=np.float64), (m,))
                                - 0.5 * self.sigma @ beta)
        self.nominal = np.zeros((config.horizon, m))
        self.model_steps = 0
        self.sigma_set: SigmaSet | None = None
        self.set_parameters(params)

    def set_parameters(self, params) -> None:
        """Replace the parameter distribution; sigma points are recomputed here only."""
        mode = self.config.propagation
        n = self.env.param_dim
        if mode is Propagation.POINT:
            point = np.asarray(getattr(params, "values", params), dtype=np.float64)
            if point.shape != (n,):
                raise ConfigError(f"point estimate must have {n} values")
            self._points = point[None, :]
            self._weights = np.ones(1)
        elif mode is Propagation.UT:
            mean, cov = params.moments() if hasattr(params, "moments") else params
            self.sigma_set = sigma_points(mean, cov, self.config.ut)
            if self.sigma_set.points.shape[1] != n:
                raise ConfigError(f"parameter distribution has dimension "
                                  f"{self.sigma_set.points.shape[1]}, expected {n}")
            self._points = self.sigma_set.points
            self._weights = self.sigma_set.mean_weights
        else:
            if not hasattr(params, "sample"):
                raise ConfigError("Monte Carlo propagation needs a samplable distribution")
            self._points = None
            L = self.config.num_param_samples
            self._weights = np.full(L, 1.0 / L)
        self.params = params

    def reset(self) -> None:
        self.nominal = np.zeros_like(self.nominal)

    def rollouts_per_step(self) -> int:
        return self.config.num_samples * self._weights.size

    def _parameter_instances(self, rng: np.random.Generator) -> NDArray:
        if self._points is not None:
            return self._points
        K, L = self.config.num_samples, self.config.num_param_samples
        draws = np.asarray(self.params.sample(rng, K * L), dtype=np.float64)
        return draws.reshape(K, L, self.env.param_dim)

    def control_step(self, x0: ArrayLike, rng: np.random.Generator) -> StepDiagnostics:
        """Run one full optimise-act-shift cycle and return the action to apply.

        The same ``K`` perturbation sequences are evaluated under every
        parameter instance.
        """
        cfg = self.config
        try:
            eps = sample_perturbations(rng, cfg.num_samples, cfg.horizon, self.sigma)
            params = self._parameter_instances(rng)
            plan = self.nominal + self.minimum_control
            per_param = rollout_costs(self.env, x0, plan, eps, params, self.cost)
            self.model_steps += per_param.size * cfg.horizon
            costs = aggregate_parameter_costs(per_param, self._weights)
            costs = costs + coupling_costs(self.nominal, eps, self.sigma_inv, cfg.lambda_)
            weights = importance_weights(costs, cfg.lambda_)
        except InvalidInputError as exc:
            raise InvalidInputError(f"control step failed: {exc}") from exc
        rho = float(costs.min())
        eta = float(np.exp(-(costs - rho) / cfg.lambda_).sum())
        self.nominal = update_nominal(self.nominal, weights, eps)
        action = self.env.clip(self.nominal[0] + self.minimum_control)
        self.nominal = roll_plan(self.nominal, self.rest)
        return StepDiagnostics(rho=rho, eta=eta, ess=effective_sample_size(weights), action=action)
