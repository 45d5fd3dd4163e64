"""Likelihood-free posterior estimation over simulator parameters.

A mixture density network ``q(theta | x)`` is fitted to pairs of parameter
draws and summary statistics of the trajectories they produce. Conditioning
it on the statistics of an observed episode gives the posterior used by the
controller.
"""

from __future__ import annotations

import csv
import io
import logging
import struct
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp, softmax

from .dynamics import Environment, wrap_angle
from .errors import InferenceError, InvalidInputError, NumericError, TrainingError

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
VARIANCE_FLOOR = 1e-6
MAX_SKIP_FRACTION = 0.10


# ---------------------------------------------------------------------------
# Distributions over parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformPrior:
    """Independent uniform distribution on a box."""

    low: NDArray[np.float64]
    high: NDArray[np.float64]

    def __post_init__(self):
        low = np.atleast_1d(np.asarray(self.low, dtype=np.float64))
        high = np.atleast_1d(np.asarray(self.high, dtype=np.float64))
        if low.shape != high.shape or np.any(low >= high):
            raise InvalidInputError(f"invalid uniform bounds {low} .. {high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def dim(self) -> int:
        return self.low.size

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return rng.uniform(self.low, self.high, size=(size, self.dim))

    def moments(self):
        return 0.5 * (self.low + self.high), np.diag((self.high - self.low) ** 2 / 12.0)

    def contains(self, theta: ArrayLike) -> NDArray[np.bool_]:
        theta = np.asarray(theta, dtype=np.float64)
        return np.all((theta >= self.low) & (theta <= self.high), axis=-1)


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted Gaussian components, optionally truncated to a box support.

    Covariances are stored as full matrices so that non-diagonal fixtures can
    be represented; networks only ever produce diagonal ones.
    """

    weights: NDArray[np.float64]
    means: NDArray[np.float64]
    covariances: NDArray[np.float64]
    support: UniformPrior | None = None
    dominance_threshold: float = 0.9

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64)
        if cov.ndim == 2:  # (K, n) diagonal variances
            cov = np.einsum("kd,de->kde", cov, np.eye(cov.shape[1]))
        k, n = mu.shape
        if w.shape != (k,) or cov.shape != (k, n, n):
            raise InvalidInputError("inconsistent mixture shapes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"mixture weights must be non-negative and sum to one: {w}")
        if np.any(np.diagonal(cov, axis1=1, axis2=2) <= 0):
            raise InvalidInputError("component variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @classmethod
    def gaussian(cls, mean, cov, **kwargs) -> "GaussianMixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 1:
            cov = np.diag(cov)
        return cls(np.ones(1), mean[None], np.atleast_2d(cov)[None], **kwargs)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def moments(self):
        return mixture_moments(self, self.dominance_threshold)

    def sample(self, rng: np.random.Generator, size: int, max_rounds: int = 100) -> NDArray[np.float64]:
        """Draw ``size`` samples, rejecting any that fall outside the support."""
        chol = np.linalg.cholesky(self.covariances)
        out = np.empty((size, self.dim))
        filled = 0
        for _ in range(max_rounds):
            need = size - filled
            comp = rng.choice(self.n_components, size=need, p=self.weights)
            z = rng.standard_normal((need, self.dim))
            draws = self.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
            if self.support is not None:
                draws = draws[self.support.contains(draws)]
            out[filled:filled + len(draws)] = draws
            filled += len(draws)
            if filled == size:
                return out
        raise NumericError("could not draw enough samples inside the mixture support")

    def log_density(self, theta: ArrayLike) -> NDArray[np.float64]:
        theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
        d = theta[:, None, :] - self.means[None]
        solve = np.linalg.solve(self.covariances[None], d[..., None])[..., 0]
        maha = np.einsum("nkd,nkd->nk", d, solve)
        _, logdet = np.linalg.slogdet(self.covariances)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        comp = log_w - 0.5 * (self.dim * LOG_2PI + logdet + maha)
        return logsumexp(comp, axis=1)

    def to_dict(self) -> dict:
        out = {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "dominance_threshold": self.dominance_threshold,
        }
        if self.support is not None:
            out["support"] = {"low": self.support.low.tolist(), "high": self.support.high.tolist()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixture":
        support = data.get("support")
        return cls(
            np.asarray(data["weights"]), np.asarray(data["means"]), np.asarray(data["covariances"]),
            support=UniformPrior(support["low"], support["high"]) if support else None,
            dominance_threshold=data.get("dominance_threshold", 0.9),
        )


def mixture_moments(mix: GaussianMixture, dominance_threshold: float = 0.9):
    """Mean and covariance handed to the unscented transform.

    A component whose weight reaches ``dominance_threshold`` is used on its
    own; otherwise the moments of the whole mixture are returned.
    """
    top = int(np.argmax(mix.weights))
    if mix.weights[top] >= dominance_threshold:
        return mix.means[top].copy(), mix.covariances[top].copy()
    mean = mix.weights @ mix.means
    d = mix.means - mean
    cov = np.einsum("k,kij->ij", mix.weights, mix.covariances + d[:, :, None] * d[:, None, :])
    return mean, cov


# ---------------------------------------------------------------------------
# Summary statistics and simulated datasets
# ---------------------------------------------------------------------------

def _corr(a: NDArray, b: NDArray) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def summary_statistics(states: ArrayLike, controls: ArrayLike, env: Environment | str,
                       final_state: ArrayLike | None = None) -> NDArray[np.float64]:
    """Fixed-length features of an episode.

    ``states[t]`` is the state in which ``controls[t]`` was applied;
    ``final_state`` is the state reached after the last control. Position
    averages use the recorded states, increments use every consecutive pair.

    skidsteer: ``(mean x, mean y, mean dx, mean dy)``.
    pendulum: mean and std of the wrapped angle and of the velocity, mean
    absolute torque, and correlations of angle and velocity with the torque
    at lags 0 and 1 (9 values).
    """
    name = env if isinstance(env, str) else env.name
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if len(states) == 0 or states.size == 0:
        raise InvalidInputError("summary statistics need a non-empty log")
    controls = np.asarray(controls, dtype=np.float64).reshape(len(states), -1)
    final = states[-1] if final_state is None else np.asarray(final_state, dtype=np.float64)
    following = np.vstack([states[1:], final[None]])

    if name == "skidsteer":
        inc = following[:, :2] - states[:, :2]
        stats = np.array([states[:, 0].mean(), states[:, 1].mean(), inc[:, 0].mean(), inc[:, 1].mean()])
    elif name == "pendulum":
        theta, theta_dot = wrap_angle(states[:, 0]), states[:, 1]
        next_theta, next_dot = wrap_angle(following[:, 0]), following[:, 1]
        u = controls[:, 0]
        stats = np.array([
            theta.mean(), theta.std(), theta_dot.mean(), theta_dot.std(), np.abs(u).mean(),
            _corr(theta, u), _corr(theta_dot, u), _corr(next_theta, u), _corr(next_dot, u),
        ])
    else:
        raise InvalidInputError(f"no summary statistics defined for {name!r}")
    if not np.all(np.isfinite(stats)):
        raise InvalidInputError("non-finite summary statistics")
    return stats


def pendulum_reference_policy(states: NDArray, max_torque: float = 2.0) -> NDArray:
    """Energy-pumping bang-bang torque used to excite the pendulum for inference."""
    theta_dot = np.asarray(states)[..., 1]
    return (max_torque * np.where(theta_dot >= 0.0, 1.0, -1.0))[..., None]


@dataclass(frozen=True)
class TrainingSet:
    theta: NDArray[np.float64]   # (N, n_theta)
    x: NDArray[np.float64]       # (N, d)
    skipped: int = 0

    def __len__(self):
        return len(self.theta)


def _simulate_batch(env: Environment, x0: NDArray, params: NDArray,
                    policy: NDArray | Callable, steps: int):
    n = len(params)
    states = np.empty((steps, n, env.state_dim))
    controls = np.empty((steps, n, env.control_dim))
    x = np.broadcast_to(x0, (n, env.state_dim)).astype(np.float64)
    for t in range(steps):
        u = policy(x) if callable(policy) else np.broadcast_to(policy[t], (n, env.control_dim))
        u = env.clip(u)
        states[t], controls[t] = x, u
        x = env.step(x, u, params)
    return states, controls, x


def generate_training_set(env: Environment, prior, policy: ArrayLike | Callable, n: int,
                          rng: np.random.Generator, x0: ArrayLike, steps: int | None = None) -> TrainingSet:
    """Simulate ``n`` episodes under parameters drawn from ``prior``.

    ``policy`` is either a ``(steps, m)`` control sequence replayed unchanged
    under every draw, or a vectorised feedback policy ``states -> controls``
    (then ``steps`` is required). Draws whose simulation fails are skipped with
    a warning; more than 10% failures is an error.
    """
    if n < 1:
        raise InvalidInputError("N must be at least 1")
    if not callable(policy):
        policy = np.asarray(policy, dtype=np.float64).reshape(-1, env.control_dim)
        steps = len(policy) if steps is None else steps
    if steps is None or steps < 1:
        raise InvalidInputError("number of simulation steps must be positive")
    x0 = np.asarray(x0, dtype=np.float64)
    theta = prior.sample(rng, n)

    try:
        states, controls, final = _simulate_batch(env, x0, theta, policy, steps)
        rows = [summary_statistics(states[:, i], controls[:, i], env, final[i]) for i in range(n)]
        keep = np.arange(n)
    except InvalidInputError:
        rows, keep = [], []
        for i in range(n):
            try:
                s, c, f = _simulate_batch(env, x0, theta[i:i + 1], policy, steps)
                rows.append(summary_statistics(s[:, 0], c[:, 0], env, f[0]))
                keep.append(i)
            except InvalidInputError as exc:
                log.warning("skipping draw %d (theta=%s): %s", i, theta[i], exc)
    skipped = n - len(keep)
    if skipped > MAX_SKIP_FRACTION * n:
        raise NumericError(f"{skipped} of {n} simulations failed")
    return TrainingSet(theta[np.asarray(keep, dtype=int)], np.asarray(rows), skipped)


def save_training_set(path: str | Path, data: TrainingSet) -> None:
    n_theta, d = data.theta.shape[1], data.x.shape[1]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"theta_{i + 1}" for i in range(n_theta)] + [f"x_{j + 1}" for j in range(d)])
        for th, x in zip(data.theta, data.x):
            writer.writerow([repr(float(v)) for v in (*th, *x)])


def load_training_set(path: str | Path) -> TrainingSet:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader], dtype=np.float64)
    n_theta = sum(h.startswith("theta_") for h in header)
    if n_theta == 0 or n_theta == len(header):
        raise InvalidInputError(f"{path}: expected theta_* and x_* columns")
    rows = rows.reshape(-1, len(header))
    return TrainingSet(rows[:, :n_theta], rows[:, n_theta:])


# ---------------------------------------------------------------------------
# Mixture density network
# ---------------------------------------------------------------------------

@dataclass
class MdnModel:
    """Tanh MLP emitting mixing logits, means and log-variances.

    Inputs and targets are standardised with the stored scalers; the network
    works in standardised units and ``mdn_forward`` maps back.
    All weights live in the flat vector ``params``; ``layers()`` returns views.
    """

    n_inputs: int
    n_outputs: int
    n_components: int = 5
    hidden: tuple[int, ...] = (32, 32)
    params: NDArray[np.float64] = field(default=None, repr=False)
    x_mean: NDArray[np.float64] = field(default=None, repr=False)
    x_scale: NDArray[np.float64] = field(default=None, repr=False)
    theta_mean: NDArray[np.float64] = field(default=None, repr=False)
    theta_scale: NDArray[np.float64] = field(default=None, repr=False)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.params is None:
            self.params = np.zeros(self.n_params)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.n_params,):
            raise InvalidInputError(f"expected {self.n_params} parameters, got {self.params.shape}")
        for name, dim in (("x_mean", self.n_inputs), ("theta_mean", self.n_outputs)):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(dim))
        for name, dim in (("x_scale", self.n_inputs), ("theta_scale", self.n_outputs)):
            if getattr(self, name) is None:
                setattr(self, name, np.ones(dim))

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = [self.n_inputs, *self.hidden, self.head_size]
        return list(zip(sizes[1:], sizes[:-1]))

    @property
    def head_size(self) -> int:
        return self.n_components * (1 + 2 * self.n_outputs)

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)

    def layers(self, flat: NDArray | None = None) -> list[tuple[NDArray, NDArray]]:
        flat = self.params if flat is None else flat
        out, pos = [], 0
        for o, i in self.layer_shapes:
            w = flat[pos:pos + o * i].reshape(o, i)
            pos += o * i
            out.append((w, flat[pos:pos + o]))
            pos += o
        return out

    @classmethod
    def initialise(cls, n_inputs: int, n_outputs: int, rng: np.random.Generator,
                   n_components: int = 5, hidden=(32, 32)) -> "MdnModel":
        model = cls(n_inputs, n_outputs, n_components, hidden)
        layers = model.layers()
        for w, b in layers[:-1]:
            w[...] = rng.uniform(-1, 1, w.shape) * np.sqrt(6.0 / sum(w.shape))
        w, b = layers[-1]
        w[...] = rng.normal(0.0, 0.01, w.shape)
        k, n = n_components, n_outputs
        b[k:k + k * n] = rng.normal(0.0, 1.0, k * n)   # spread component means
        return model

    def copy(self) -> "MdnModel":
        return replace(self, params=self.params.copy())


def _split_heads(out: NDArray, k: int, n: int):
    logits = out[:, :k]
    means = out[:, k:k + k * n].reshape(-1, k, n)
    log_var = out[:, k + k * n:].reshape(-1, k, n)
    return logits, means, log_var


def _forward(model: MdnModel, x_std: NDArray, flat: NDArray | None = None):
    acts = [x_std]
    layers = model.layers(flat)
    for w, b in layers[:-1]:
        acts.append(np.tanh(acts[-1] @ w.T + b))
    w, b = layers[-1]
    return acts, acts[-1] @ w.T + b


def _standardise_x(model: MdnModel, x: ArrayLike) -> NDArray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.n_inputs:
        raise InvalidInputError(f"expected {model.n_inputs} summary statistics, got {x.shape[1]}")
    return (x - model.x_mean) / model.x_scale


def mdn_forward(model: MdnModel, x: ArrayLike) -> GaussianMixture:
    """Conditional mixture ``q(theta | x)`` for a single statistics vector."""
    acts, out = _forward(model, _standardise_x(model, x))
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite network activations")
    logits, means, log_var = _split_heads(out, model.n_components, model.n_outputs)
    weights = softmax(logits[0])
    var = np.maximum(np.exp(log_var[0]), VARIANCE_FLOOR)
    return GaussianMixture(
        weights,
        means[0] * model.theta_scale + model.theta_mean,
        var * model.theta_scale**2,
    )


def _loss_and_grad(model: MdnModel, theta: NDArray, x: NDArray, flat: NDArray | None = None,
                   need_grad: bool = True):
    k, n = model.n_components, model.n_outputs
    flat = model.params if flat is None else flat
    acts, out = _forward(model, _standardise_x(model, x), flat)
    logits, means, log_var = _split_heads(out, k, n)
    t = (np.atleast_2d(theta) - model.theta_mean) / model.theta_scale
    raw_var = np.exp(log_var)
    var = np.maximum(raw_var, VARIANCE_FLOOR)
    diff = t[:, None, :] - means
    log_comp = -0.5 * np.sum(LOG_2PI + np.log(var) + diff**2 / var, axis=2)
    log_alpha = logits - logsumexp(logits, axis=1, keepdims=True)
    joint = log_alpha + log_comp
    log_p = logsumexp(joint, axis=1) - np.sum(np.log(model.theta_scale))
    batch = len(t)
    loss = -float(np.mean(log_p))
    if not need_grad:
        return loss, None

    resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))          # (B, K)
    g_logits = np.exp(log_alpha) - resp
    g_means = -resp[:, :, None] * diff / var
    g_logvar = resp[:, :, None] * 0.5 * (1.0 - diff**2 / var) * (raw_var > VARIANCE_FLOOR)
    delta = np.concatenate([g_logits, g_means.reshape(batch, -1), g_logvar.reshape(batch, -1)], axis=1) / batch

    grads = []
    layers = model.layers(flat)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        grads.append((delta.T @ acts[li], delta.sum(axis=0)))
        if li > 0:
            delta = (delta @ w) * (1.0 - acts[li] ** 2)
    grad = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in reversed(grads)])
    return loss, grad


def mdn_loss(model: MdnModel, theta: ArrayLike, x: ArrayLike) -> float:
    """Negative mean log-likelihood of ``theta`` under ``q(theta | x)``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    if len(theta) == 0:
        raise InvalidInputError("empty batch")
    return _loss_and_grad(model, theta, x, need_grad=False)[0]


def mdn_loss_gradient(model: MdnModel, theta: ArrayLike, x: ArrayLike) -> NDArray[np.float64]:
    """Exact gradient of :func:`mdn_loss` with respect to the flat weights."""
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    if len(theta) == 0:
        raise InvalidInputError("empty batch")
    return _loss_and_grad(model, theta, x)[1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    validation_fraction: float = 0.1
    n_components: int = 5
    hidden: tuple[int, ...] = (32, 32)


@dataclass
class TrainReport:
    train_loss: list[float]
    validation_loss: list[float]
    best_epoch: int


def train_mdn(data: TrainingSet, config: TrainConfig = TrainConfig()) -> tuple[MdnModel, TrainReport]:
    """Fit an MDN with Adam, keeping the weights with the best validation loss."""
    n = len(data)
    if n < config.batch_size:
        raise InvalidInputError(f"dataset of {n} rows is smaller than the batch size {config.batch_size}")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    n_val = int(round(config.validation_fraction * n))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) < 1:
        raise InvalidInputError("no training rows left after the validation split")
    theta_tr, x_tr = data.theta[train_idx], data.x[train_idx]
    theta_val, x_val = (data.theta[val_idx], data.x[val_idx]) if n_val else (theta_tr, x_tr)

    model = MdnModel.initialise(data.x.shape[1], data.theta.shape[1], rng,
                                config.n_components, config.hidden)
    model.x_mean, model.x_scale = x_tr.mean(axis=0), _safe_scale(x_tr)
    model.theta_mean, model.theta_scale = theta_tr.mean(axis=0), _safe_scale(theta_tr)

    m = np.zeros_like(model.params)
    v = np.zeros_like(model.params)
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    best = (np.inf, model.params.copy(), -1)
    report = TrainReport([], [], -1)
    for epoch in range(config.epochs):
        perm = rng.permutation(len(train_idx))
        losses = []
        for start in range(0, len(perm), config.batch_size):
            batch = perm[start:start + config.batch_size]
            loss, grad = _loss_and_grad(model, theta_tr[batch], x_tr[batch])
            if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingError(f"training diverged at epoch {epoch}", epoch)
            step += 1
            m = b1 * m + (1 - b1) * grad
            v = b2 * v + (1 - b2) * grad**2
            m_hat = m / (1 - b1**step)
            v_hat = v / (1 - b2**step)
            model.params -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            losses.append(loss * len(batch))
        val = mdn_loss(model, theta_val, x_val)
        if not np.isfinite(val):
            raise TrainingError(f"validation loss is not finite at epoch {epoch}", epoch)
        report.train_loss.append(float(np.sum(losses) / len(train_idx)))
        report.validation_loss.append(float(val))
        if val < best[0]:
            best = (val, model.params.copy(), epoch)
    model.params = best[1]
    report.best_epoch = best[2]
    return model, report


def _safe_scale(a: NDArray) -> NDArray:
    s = a.std(axis=0)
    return np.where(s > 0, s, 1.0)


def posterior(model: MdnModel, x_real: ArrayLike, prior: UniformPrior,
              proposal: UniformPrior | None = None, dominance_threshold: float = 0.9) -> GaussianMixture:
    """Posterior mixture given observed summary statistics.

    With uniform prior and proposal the density ratio is constant on the
    prior support, so the network's mixture is truncated to that support:
    components whose means fall outside lose their weight and the remaining
    weights are renormalised.
    """
    if proposal is not None and not isinstance(proposal, UniformPrior):
        raise InvalidInputError("only uniform proposals are supported")
    if not isinstance(prior, UniformPrior):
        raise InvalidInputError("only uniform priors are supported")
    q = mdn_forward(model, x_real)
    inside = prior.contains(q.means)
    if proposal is not None:
        inside &= proposal.contains(q.means)
    weights = np.where(inside, q.weights, 0.0)
    total = weights.sum()
    if total <= 0.0:
        raise InferenceError("posterior has no mass inside the prior support")
    return GaussianMixture(weights / total, q.means, q.covariances, support=prior,
                           dominance_threshold=dominance_threshold)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

MODEL_MAGIC = b"DISCOMDN"
MODEL_VERSION = 1


def dump_model(model: MdnModel) -> bytes:
    """Versioned binary format: magic, version and architecture dims as
    little-endian uint32, followed by scalers and weights as little-endian
    float64."""
    dims = [model.n_inputs, model.n_outputs, model.n_components, len(model.hidden), *model.hidden]
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack(f"<{len(dims) + 1}I", MODEL_VERSION, *dims))
    for arr in (model.x_mean, model.x_scale, model.theta_mean, model.theta_scale, model.params):
        buf.write(np.asarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def parse_model(raw: bytes) -> MdnModel:
    if raw[:8] != MODEL_MAGIC:
        raise InvalidInputError("not an MDN model file")
    pos = 8
    version, n_in, n_out, k, n_hidden = struct.unpack_from("<5I", raw, pos)
    pos += 20
    if version != MODEL_VERSION:
        raise InvalidInputError(f"unsupported model file version {version}")
    hidden = struct.unpack_from(f"<{n_hidden}I", raw, pos)
    pos += 4 * n_hidden
    model = MdnModel(n_in, n_out, k, hidden)
    arrays = []
    for size in (n_in, n_in, n_out, n_out, model.n_params):
        arrays.append(np.frombuffer(raw, dtype="<f8", count=size, offset=pos).astype(np.float64))
        pos += 8 * size
    if pos != len(raw):
        raise InvalidInputError("model file has trailing or missing bytes")
    model.x_mean, model.x_scale, model.theta_mean, model.theta_scale, model.params = arrays
    return model


def save_model(path: str | Path, model: MdnModel) -> None:
    Path(path).write_bytes(dump_model(model))


def load_model(path: str | Path) -> MdnModel:
    return parse_model(Path(path).read_bytes())
